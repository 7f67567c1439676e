"""Contact fixed-point iteration for the stabilised Nitsche method.

Starting from the solution without contact, each iteration freezes the
contact indicator of the current iterate, solves the resulting linear
system and stops once the strain-energy norm of the increment drops to the
tolerance.  A repeated contact pattern that does not meet the tolerance is
reported as non-convergence instead of looping until the iteration cap.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .assembly import (
    ContactState,
    Discretisation,
    assemble_nitsche,
    contact_state,
    reaction,
    solve,
)
from .mesh import Mesh
from .problem import ObstacleProblem

__all__ = ["DiscreteSolution", "solve_contact", "reaction_field", "ReactionField"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscreteSolution:
    """Displacement on one mesh together with the iteration record.

    Attributes
    ----------
    dofs : ndarray
        Full Argyris DOF vector (constrained entries included).
    free : ndarray or None
        Free coefficients solved for (None for fields built with
        :meth:`from_dofs`).
    iterations : int
        Number of linear solves, including the initial no-contact solve.
    converged : bool
    increment : float
        Energy norm of the last increment.
    """

    problem: ObstacleProblem
    disc: Discretisation
    free: np.ndarray | None
    dofs: np.ndarray
    iterations: int
    converged: bool
    increment: float

    @classmethod
    def from_dofs(cls, problem: ObstacleProblem, disc: Discretisation, dofs) -> "DiscreteSolution":
        """Wrap an arbitrary field (e.g. an interpolant) to evaluate estimators on it."""
        dofs = np.asarray(dofs, dtype=float)
        if dofs.shape != (disc.space.n_dofs,):
            raise ValueError(f"expected {disc.space.n_dofs} DOFs, got {dofs.shape}")
        return cls(problem, disc, None, dofs, 0, True, 0.0)

    @property
    def mesh(self) -> Mesh:
        return self.disc.mesh

    @property
    def space(self):
        return self.disc.space

    @property
    def n_free(self) -> int:
        return self.disc.n_free

    @cached_property
    def contact(self) -> ContactState:
        """Reaction ``F(u_h)`` and indicator at the triangle quadrature points."""
        return contact_state(self.problem, self.disc, self.dofs)

    def evaluate(self, points, order: int = 0, elements=None) -> np.ndarray:
        """Derivatives of order ``order`` of ``u_h`` at points, shape (order+1, n).

        Points outside the mesh yield NaN.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if elements is None:
            elements = self.space.locate(points)
        elements = np.asarray(elements)
        out = np.full((order + 1, len(points)), np.nan)
        ok = elements >= 0
        if ok.any():
            out[:, ok] = self.space.evaluate(self.dofs, elements[ok], points[ok], order)
        return out

    def values(self, points, elements=None) -> np.ndarray:
        return self.evaluate(points, 0, elements)[0]

    def reaction_at(self, points, elements=None) -> np.ndarray:
        """``lambda_h = F(u_h)`` at arbitrary points (NaN outside the mesh)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if elements is None:
            elements = self.space.locate(points)
        elements = np.asarray(elements)
        out = np.full(len(points), np.nan)
        ok = elements >= 0
        if not self.problem.has_obstacle:
            out[ok] = 0.0
            return out
        if ok.any():
            el, p = elements[ok], points[ok]
            w = self.space.evaluate(self.dofs, el, p, 0)[0]
            a_w = self.disc.model.D * np.einsum(
                "nj,nj->n", self.space.bilaplacian(el, p), self.space.element_values(self.dofs)[el]
            )
            f = self.problem.load(p[:, 0], p[:, 1])
            g = self.problem.obstacle(p[:, 0], p[:, 1])
            out[ok] = reaction(self.problem, self.mesh.diameters[el], w, a_w, f, g)
        return out

    def energy_norm(self, other=None) -> float:
        """``sqrt(a(u - other, u - other))`` over the free coefficients
        (``other`` defaults to zero)."""
        if self.free is None:
            raise ValueError("energy norm needs free coefficients")
        d = self.free if other is None else self.free - np.asarray(other)
        return _energy(self.disc, d)


def _energy(disc: Discretisation, delta: np.ndarray) -> float:
    return float(np.sqrt(max(delta @ (disc.energy_matrix @ delta), 0.0)))


def solve_contact(problem: ObstacleProblem, mesh: Mesh, disc: Discretisation | None = None) -> DiscreteSolution:
    """Solve the discrete obstacle problem on ``mesh`` by contact iterations.

    Raises
    ------
    SolverError
        If a linear solve fails.
    """
    disc = disc or Discretisation(mesh, problem.model)
    x = solve(assemble_nitsche(problem, disc, None))
    solves = 1
    converged = False
    increment = np.inf
    if not problem.has_obstacle:
        # the contact set stays empty; one more solve confirms the fixed point
        x_new = solve(assemble_nitsche(problem, disc, None))
        increment = _energy(disc, x_new - x)
        return DiscreteSolution(problem, disc, x_new, disc.expand(x_new), 2, increment <= problem.tol, increment)

    seen = set()
    last = None
    for _ in range(problem.max_iterations):
        state = contact_state(problem, disc, disc.expand(x))
        key = state.chi.tobytes()
        if key in seen and key != last:
            log.warning("contact pattern repeats after %d solves without meeting tol", solves)
            break
        seen.add(key)
        last = key
        x_new = solve(assemble_nitsche(problem, disc, state))
        solves += 1
        increment = _energy(disc, x_new - x)
        x = x_new
        log.debug("solve %d: increment %.3e, contact fraction %.4f", solves, increment, state.fraction)
        if increment <= problem.tol:
            converged = True
            break
    return DiscreteSolution(problem, disc, x, disc.expand(x), solves, converged, increment)


@dataclass(frozen=True)
class ReactionField:
    """``lambda_h`` at the triangle quadrature points and contact fraction per element."""

    values: np.ndarray  # (nt, nq)
    contact_fraction: np.ndarray  # (nt,) weighted share of the element in contact
    points: np.ndarray
    weights: np.ndarray

    @property
    def area_fraction(self) -> float:
        return float(np.sum(self.weights * (self.values > 0)) / np.sum(self.weights))


def reaction_field(solution: DiscreteSolution) -> ReactionField:
    q = solution.disc.quad
    lam = solution.contact.reaction
    frac = np.sum(q.weights * (lam > 0), axis=1) / np.sum(q.weights, axis=1)
    return ReactionField(lam, frac, q.points, q.weights)
