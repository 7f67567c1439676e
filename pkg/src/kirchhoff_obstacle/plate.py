"""Kirchhoff-Love plate quantities evaluated from displacement derivatives.

Every function here is a pure point operator acting on arrays of derivatives
(any leading shape), so the same code serves assembly, estimation and tests.

Conventions
-----------
Curvature is ``K(u) = -Hess u`` and the moment ``M = (d^3/12) C(K)`` with the
isotropic law ``C(A) = E/(1+nu) (A + nu/(1-nu) tr(A) I)``.  The shear force is
``Q = Div M`` and the Kirchhoff shear on an edge with unit normal ``n`` and
tangent ``s`` is ``V_n = Q.n + d/ds (s.M n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PlateModel",
    "PointState",
    "moment_tensor",
    "biharmonic",
    "shear_force",
    "normal_moment_and_kirchhoff_shear",
    "edge_jumps",
    "energy_density",
    "energy_inner_product",
]


@dataclass(frozen=True)
class PlateModel:
    """Material and thickness of an isotropic plate.

    Parameters
    ----------
    E : float
        Young's modulus.
    nu : float
        Poisson ratio, ``0 <= nu < 0.5``.
    d : float
        Plate thickness.
    """

    E: float = 1.0
    nu: float = 0.0
    d: float = 1.0
    D: float = field(init=False)

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError(f"Young's modulus must be positive, got {self.E}")
        if not 0 <= self.nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {self.nu}")
        if not self.d > 0:
            raise ValueError(f"thickness must be positive, got {self.d}")
        object.__setattr__(self, "D", self.E * self.d**3 / (12.0 * (1.0 - self.nu**2)))


@dataclass(frozen=True)
class PointState:
    """Derivatives of a displacement at a set of points.

    Each derivative array stacks the partials of one order along axis 0 in
    the order (x-heavy first): ``hessian = (u_xx, u_xy, u_yy)``,
    ``third = (u_xxx, u_xxy, u_xyy, u_yyy)`` and so on.
    """

    points: np.ndarray
    value: np.ndarray | None = None
    gradient: np.ndarray | None = None
    hessian: np.ndarray | None = None
    third: np.ndarray | None = None
    fourth: np.ndarray | None = None


def moment_tensor(model: PlateModel, hessian) -> np.ndarray:
    """Bending moment ``M`` for Hessian entries ``(u_xx, u_xy, u_yy)``.

    Returns an array of shape ``hessian.shape[1:] + (2, 2)``.
    """
    uxx, uxy, uyy = np.asarray(hessian, dtype=float)
    D, nu = model.D, model.nu
    # (d^3/12) E/(1+nu) equals D (1 - nu)
    mxx = -D * (uxx + nu * uyy)
    myy = -D * (uyy + nu * uxx)
    mxy = -D * (1.0 - nu) * uxy
    return np.stack([np.stack([mxx, mxy], -1), np.stack([mxy, myy], -1)], -2)


def biharmonic(model: PlateModel, fourth) -> np.ndarray:
    """``A(u) = D (u_xxxx + 2 u_xxyy + u_yyyy)``."""
    f = np.asarray(fourth, dtype=float)
    return model.D * (f[0] + 2.0 * f[2] + f[4])


def shear_force(model: PlateModel, third) -> np.ndarray:
    """``Q = Div M`` from third derivatives; shape ``(2,) + third.shape[1:]``."""
    t = np.asarray(third, dtype=float)
    return np.stack([-model.D * (t[0] + t[2]), -model.D * (t[1] + t[3])])


def normal_moment_and_kirchhoff_shear(model: PlateModel, hessian, third, n, s):
    """Normal moment ``M_nn`` and Kirchhoff shear ``V_n`` on a straight edge.

    Parameters
    ----------
    hessian, third : array_like
        Second and third derivatives at the edge points, stacked on axis 0.
    n, s : array_like
        Unit normal and tangent, shape (2,) or broadcastable to the points
        with a trailing axis of length 2.

    Returns
    -------
    (M_nn, V_n)
    """
    n = np.asarray(n, dtype=float)
    s = np.asarray(s, dtype=float)
    M = moment_tensor(model, hessian)
    m_nn = np.einsum("...i,...ij,...j->...", n, M, n)
    Q = np.moveaxis(shear_force(model, third), 0, -1)
    q_n = np.einsum("...i,...i->...", Q, n)
    # d/ds M_ns = s_k (dM_ij/dx_k) s_i n_j, with dM/dx_k linear in the third derivatives
    t = np.asarray(third, dtype=float)
    dM_dx = moment_tensor(model, t[0:3])
    dM_dy = moment_tensor(model, t[1:4])
    dM_ds = s[..., 0, None, None] * dM_dx + s[..., 1, None, None] * dM_dy
    d_mns = np.einsum("...i,...ij,...j->...", s, dM_ds, n)
    return m_nn, q_n + d_mns


def edge_jumps(model: PlateModel, side1, side2, n, s):
    """Jumps of ``M_nn`` and ``V_n`` across an interior edge.

    ``side1`` and ``side2`` are ``(hessian, third)`` pairs evaluated from the
    two incident elements at the same edge points; ``n`` is the outward
    normal of element 1 and ``s`` the matching tangent.  Each side is
    measured with its own outward normal, so
    ``[[M_nn]] = M_nn(1) - M_nn(2)`` and ``[[V_n]] = V_n(1) + V_n'(2)``.
    """
    n = np.asarray(n, dtype=float)
    s = np.asarray(s, dtype=float)
    m1, v1 = normal_moment_and_kirchhoff_shear(model, *side1, n, s)
    m2, v2 = normal_moment_and_kirchhoff_shear(model, *side2, -n, -s)
    return m1 - m2, v1 + v2


def energy_density(model: PlateModel, hess_w, hess_v) -> np.ndarray:
    """Pointwise ``M(w) : K(v)``."""
    Mw = moment_tensor(model, hess_w)
    v = np.asarray(hess_v, dtype=float)
    return -(Mw[..., 0, 0] * v[0] + 2.0 * Mw[..., 0, 1] * v[1] + Mw[..., 1, 1] * v[2])


def energy_inner_product(space, model: PlateModel, w, v, rule=None) -> float:
    """Strain energy product ``a(w, v)`` of two finite element fields.

    Parameters
    ----------
    space : ArgyrisSpace
    w, v : array_like
        Global DOF vectors.
    rule : QuadratureRule, optional
        Triangle rule; degree 8 integrates products of cubics exactly.
    """
    from .quadrature import triangle_quadrature

    rule = rule or triangle_quadrature(8)
    hess = space.on_rule(rule, orders=(2,))[2]
    _, weights = space.local_points(rule)
    hw = np.einsum("rtqj,tj->rtq", hess, space.element_values(w))
    hv = np.einsum("rtqj,tj->rtq", hess, space.element_values(v))
    return float(np.sum(weights * energy_density(model, hw, hv)))
