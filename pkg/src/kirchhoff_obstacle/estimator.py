"""Residual a posteriori estimators and maximum-strategy marking.

For a discrete solution ``u_h`` with reaction ``lambda_h = F(u_h)``::

    eta_K^2 = h_K^4 ||A(u_h) - lambda_h - f||_K^2
    eta_E^2 = h_E^3 ||[[V_n(u_h)]]||_E^2 + h_E ||[[M_nn(u_h)]]||_E^2      (interior E)
    S_K^2   = ||(g - u_h - eps lambda_h)_+||_K^2 / (eps + h_K^4)
    C_K     = ((u_h - g + eps lambda_h)_+, lambda_h)_K

and the element indicator ``E_K^2 = eta_K^2 + 1/2 sum_{E in K} eta_E^2 + C_K + S_K^2``.
The global values are ``eta^2 = sum eta_K^2 + sum eta_E^2`` and
``S^2 = sum (C_K + S_K^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .plate import edge_jumps
from .quadrature import edge_quadrature

__all__ = [
    "ErrorBreakdown",
    "EDGE_POINTS",
    "edge_jump_profiles",
    "interior_residual",
    "edge_residual",
    "obstacle_terms",
    "estimate",
    "mark_elements",
    "interior_integral",
    "edge_integral",
    "obstacle_integrals",
]

EDGE_POINTS = 10


@dataclass(frozen=True)
class ErrorBreakdown:
    """Estimator contributions; all per-entity arrays hold non-squared values.

    Attributes
    ----------
    eta_K : (nt,) interior residuals
    eta_E : (ne,) edge residuals (zero on boundary edges)
    contact : (nt,) contact consistency integrals ``C_K`` (already squared quantities)
    S_K : (nt,) penetration terms
    indicators : (nt,) element indicators ``E_K``
    """

    eta_K: np.ndarray
    eta_E: np.ndarray
    contact: np.ndarray
    S_K: np.ndarray
    indicators: np.ndarray

    @property
    def eta(self) -> float:
        return float(np.sqrt(np.sum(self.eta_K**2) + np.sum(self.eta_E**2)))

    @property
    def S(self) -> float:
        return float(np.sqrt(np.sum(self.contact) + np.sum(self.S_K**2)))

    @property
    def total(self) -> float:
        return self.eta + self.S


def _elements(solution, elements):
    if elements is None:
        return np.arange(solution.mesh.n_triangles)
    return np.atleast_1d(np.asarray(elements, dtype=np.int64))


def _reaction_and_fields(solution, elements):
    q = solution.disc.quad
    local = solution.space.element_values(solution.dofs)[elements]
    u = np.einsum("tqj,tj->tq", q.phi[elements], local)
    a_u = np.einsum("tqj,tj->tq", q.a_phi[elements], local)
    lam = solution.contact.reaction[elements]
    x, y = q.points[elements, :, 0], q.points[elements, :, 1]
    return q, u, a_u, lam, solution.problem.load(x, y), x, y


def interior_integral(weights, h, residual) -> np.ndarray:
    """``h^2 ||residual||`` per element from point values (nt, nq)."""
    return np.asarray(h) ** 2 * np.sqrt(np.sum(weights * np.asarray(residual) ** 2, axis=-1))


def obstacle_integrals(weights, h, u, g, lam, eps: float):
    """``C_K = ((u - g + eps lam)_+, lam)_K`` and
    ``S_K = ||(g - u - eps lam)_+||_K / sqrt(eps + h^4)`` from point values."""
    gap = u - g + eps * lam
    contact = np.sum(weights * np.maximum(gap, 0.0) * lam, axis=-1)
    pen = np.maximum(-gap, 0.0)
    S_K = np.sqrt(np.sum(weights * pen**2, axis=-1) / (eps + np.asarray(h) ** 4))
    return contact, S_K


def edge_integral(h, weights, jump_m, jump_v) -> np.ndarray:
    """``sqrt(h^3 ||[[V_n]]||^2 + h ||[[M_nn]]||^2)`` per edge from point values."""
    h = np.asarray(h, dtype=float)
    return np.sqrt(h**3 * np.sum(weights * jump_v**2, axis=-1) + h * np.sum(weights * jump_m**2, axis=-1))


def interior_residual(solution, elements=None) -> np.ndarray:
    """``eta_K`` for the given elements (all by default)."""
    el = _elements(solution, elements)
    q, _, a_u, lam, f, _, _ = _reaction_and_fields(solution, el)
    return interior_integral(q.weights[el], q.h[el], a_u - lam - f)


def obstacle_terms(solution, elements=None):
    """Contact consistency ``C_K`` and penetration ``S_K`` for the given elements."""
    el = _elements(solution, elements)
    problem = solution.problem
    if not problem.has_obstacle:
        return np.zeros(len(el)), np.zeros(len(el))
    q, u, _, lam, _, x, y = _reaction_and_fields(solution, el)
    return obstacle_integrals(q.weights[el], q.h[el], u, problem.obstacle(x, y), lam, problem.eps)


def edge_jump_profiles(solution, edges=None, n_points: int = EDGE_POINTS):
    """Jumps of ``M_nn`` and ``V_n`` at Gauss points of interior edges.

    Returns ``(points, weights, jump_m, jump_v)`` with shapes (m, n_points, 2)
    and (m, n_points); the normal is the outward normal of the first
    incident triangle.

    Raises
    ------
    ValueError
        If a requested edge lies on the boundary.
    """
    mesh = solution.mesh
    edges = mesh.interior_edges if edges is None else np.atleast_1d(np.asarray(edges, dtype=np.int64))
    if np.any(mesh.boundary_edges[edges]):
        raise ValueError("jumps are only defined on interior edges")
    rule = edge_quadrature(2 * n_points - 1)
    a = mesh.vertices[mesh.edges[edges, 0]]
    b = mesh.vertices[mesh.edges[edges, 1]]
    pts = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
    length = mesh.edge_lengths[edges]
    weights = rule.weights[None, :] * length[:, None]
    t1, t2 = mesh.edge_triangles[edges].T
    # outward normal of t1: the edge runs a->b inside t1 counter-clockwise or not
    normals = mesh.edge_normals[edges]
    cen = mesh.centroids[t1]
    flip = np.einsum("ei,ei->e", normals, 0.5 * (a + b) - cen) < 0
    normals = np.where(flip[:, None], -normals, normals)
    tangents = np.stack([-normals[:, 1], normals[:, 0]], axis=1)
    space = solution.space
    local = space.element_values(solution.dofs)

    def side(t):
        hess = np.einsum("retj,ej->ret", space.derivatives(t, pts, 2), local[t])
        third = np.einsum("retj,ej->ret", space.derivatives(t, pts, 3), local[t])
        return hess, third

    jm, jv = edge_jumps(
        solution.disc.model, side(t1), side(t2), normals[:, None, :], tangents[:, None, :]
    )
    return pts, weights, jm, jv


def edge_residual(solution, edges=None) -> np.ndarray:
    """``eta_E`` for interior edges (all interior edges by default)."""
    mesh = solution.mesh
    edges = mesh.interior_edges if edges is None else np.atleast_1d(np.asarray(edges, dtype=np.int64))
    _, w, jm, jv = edge_jump_profiles(solution, edges)
    return edge_integral(mesh.edge_lengths[edges], w, jm, jv)


def estimate(solution) -> ErrorBreakdown:
    """All estimator contributions and the element indicators."""
    mesh = solution.mesh
    eta_K = interior_residual(solution)
    eta_E = np.zeros(mesh.n_edges)
    interior = mesh.interior_edges
    if interior.size:
        eta_E[interior] = edge_residual(solution, interior)
    contact, S_K = obstacle_terms(solution)
    edge_share = 0.5 * np.sum(eta_E[mesh.triangle_edges] ** 2, axis=1)
    ind = np.sqrt(eta_K**2 + edge_share + contact + S_K**2)
    return ErrorBreakdown(eta_K, eta_E, contact, S_K, ind)


def mark_elements(indicators, theta: float) -> np.ndarray:
    """Sorted ids of the elements with ``E_K >= theta * max E_K``.

    The comparison is non-strict so the maximiser is always marked.
    """
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    ind = np.asarray(indicators, dtype=float)
    if ind.size == 0:
        raise ValueError("no indicators to mark")
    return np.flatnonzero(ind >= theta * ind.max())
