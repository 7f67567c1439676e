"""Adaptive (or uniform) solve-estimate-mark-refine loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import SolverError
from .estimator import ErrorBreakdown, estimate, mark_elements
from .mesh import Mesh, rgb_refine, uniform_refine
from .problem import ObstacleProblem
from .solver import DiscreteSolution, reaction_field, solve_contact

__all__ = [
    "StepRecord",
    "AdaptiveHistory",
    "AdaptiveFailure",
    "adaptive_solve",
    "convergence_slope",
    "HISTORY_COLUMNS",
]

log = logging.getLogger(__name__)

HISTORY_COLUMNS = (
    "step",
    "N",
    "eta",
    "S",
    "eta_plus_S",
    "solver_iterations",
    "contact_area_fraction",
    "converged",
)


@dataclass(frozen=True)
class StepRecord:
    step: int
    mesh: Mesh
    solution: DiscreteSolution
    errors: ErrorBreakdown
    marked: np.ndarray

    @property
    def N(self) -> int:
        return self.solution.n_free

    @property
    def contact_area_fraction(self) -> float:
        return reaction_field(self.solution).area_fraction

    def row(self) -> dict:
        return {
            "step": self.step,
            "N": self.N,
            "eta": self.errors.eta,
            "S": self.errors.S,
            "eta_plus_S": self.errors.total,
            "solver_iterations": self.solution.iterations,
            "contact_area_fraction": self.contact_area_fraction,
            "converged": int(self.solution.converged),
        }


@dataclass
class AdaptiveHistory:
    mode: str
    records: list = field(default_factory=list)
    final_mesh: Mesh | None = None

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, k) -> StepRecord:
        return self.records[k]

    @property
    def N(self) -> np.ndarray:
        return np.array([r.N for r in self.records])

    @property
    def totals(self) -> np.ndarray:
        return np.array([r.errors.total for r in self.records])

    def slope(self, last: int | None = None) -> float:
        return convergence_slope(self.N, self.totals, last)


class AdaptiveFailure(SolverError):
    """A linear solve failed inside the loop; ``history`` holds the completed steps."""

    def __init__(self, message: str, history: AdaptiveHistory, condition=None):
        super().__init__(message, condition)
        self.history = history


def adaptive_solve(
    problem: ObstacleProblem,
    mesh: Mesh,
    steps: int,
    mode: str = "adaptive",
    on_step: Callable[[StepRecord], None] | None = None,
) -> AdaptiveHistory:
    """Run ``steps`` rounds of solve, estimate, mark and refine.

    Each round solves on the current mesh and then refines it, so the
    history has ``steps`` records and the mesh is refined exactly ``steps``
    times (the last refined mesh is kept as ``final_mesh``).  In
    ``"uniform"`` mode every element is red-refined.

    ``on_step`` is called with each record as soon as it is complete.
    """
    if steps < 1:
        raise ValueError("at least one step is required")
    if mode not in ("adaptive", "uniform"):
        raise ValueError(f"unknown refinement mode {mode!r}")
    history = AdaptiveHistory(mode)
    for k in range(steps):
        try:
            sol = solve_contact(problem, mesh)
        except SolverError as exc:
            raise AdaptiveFailure(f"step {k}: {exc}", history, exc.condition) from exc
        errors = estimate(sol)
        if mode == "adaptive":
            marked = mark_elements(errors.indicators, problem.theta)
            new_mesh = rgb_refine(mesh, marked)
        else:
            marked = np.arange(mesh.n_triangles)
            new_mesh = uniform_refine(mesh)
        rec = StepRecord(k, mesh, sol, errors, marked)
        history.records.append(rec)
        log.info(
            "step %d: N=%d eta+S=%.4e iterations=%d converged=%s",
            k, rec.N, errors.total, sol.iterations, sol.converged,
        )
        if on_step is not None:
            on_step(rec)
        mesh = new_mesh
    history.final_mesh = mesh
    return history


def convergence_slope(N, values, last: int | None = None) -> float:
    """Least-squares slope of ``log(values)`` against ``log(N)``.

    By default the last ``max(3, M - 2)`` of the ``M`` points are used.
    """
    N = np.asarray(N, dtype=float)
    values = np.asarray(values, dtype=float)
    M = len(N)
    if last is None:
        last = max(3, M - 2)
    last = min(last, M)
    if last < 2:
        raise ValueError("a slope needs at least two points")
    return float(np.polyfit(np.log(N[-last:]), np.log(values[-last:]), 1)[0])
