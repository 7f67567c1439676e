"""Problem data for the plate obstacle problem."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .plate import PlateModel

__all__ = ["ObstacleProblem", "as_field"]


def as_field(value) -> Callable | None:
    """Turn a constant or callable into a vectorised ``fn(x, y)``; ``None`` passes through."""
    if value is None or callable(value):
        return value
    c = float(value)
    return lambda x, y: np.full(np.shape(x), c)


@dataclass(frozen=True)
class ObstacleProblem:
    """Load, obstacle and discretisation parameters.

    Parameters
    ----------
    f : callable or float
        Transverse load ``f(x, y)``.
    g : callable, float or None
        Obstacle ``g(x, y)``; ``None`` means no obstacle at all.
    eps : float
        Obstacle compliance; ``0`` is a rigid obstacle.
    alpha : float
        Stabilisation parameter; the element weight is ``alpha * h_K**4``.
    model : PlateModel
    tol : float
        Stopping tolerance on the energy norm of the iterate increment.
    max_iterations : int
        Safeguard on the number of contact iterations.
    theta : float
        Marking parameter of the maximum strategy.
    """

    f: Callable | float = 0.0
    g: Callable | float | None = None
    eps: float = 0.0
    alpha: float = 1e-5
    model: PlateModel = field(default_factory=PlateModel)
    tol: float = 1e-10
    max_iterations: int = 50
    theta: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "f", as_field(self.f))
        object.__setattr__(self, "g", as_field(self.g))
        if self.f is None:
            raise ValueError("a load must be given")
        if not self.eps >= 0:
            raise ValueError(f"eps must be non-negative, got {self.eps}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")

    @property
    def has_obstacle(self) -> bool:
        return self.g is not None

    def load(self, x, y) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.f(x, y), dtype=float), np.shape(x))

    def obstacle(self, x, y) -> np.ndarray:
        if self.g is None:
            return np.full(np.shape(x), -np.inf)
        return np.broadcast_to(np.asarray(self.g(x, y), dtype=float), np.shape(x))
