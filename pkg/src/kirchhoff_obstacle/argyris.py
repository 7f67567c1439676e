"""Quintic C1 (Argyris) triangle.

Degrees of freedom per triangle, in local order::

    vertex k (k = 0, 1, 2): u, u_x, u_y, u_xx, u_xy, u_yy     -> 6k .. 6k+5
    edge k = (v_k, v_k+1):  du/dn at the midpoint             -> 18 + k

Edge normals follow a global rule (tangent from the lower to the higher vertex
id, rotated clockwise) so both neighbours of an edge share the functional.

Shape functions are built directly on the physical element by inverting the
functional matrix of the 21 monomials of degree <= 5 in the scaled local
coordinates ``xi = (x - centroid) / h_K``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import factorial
from typing import Callable

import numpy as np

from .mesh import ElementGeometry, Mesh
from .quadrature import QuadratureRule

__all__ = [
    "MONOMIALS",
    "DERIVATIVES",
    "DofLayout",
    "ElementBasis",
    "ArgyrisSpace",
    "build_dof_layout",
    "element_basis",
    "interpolate",
    "monomial_derivatives",
]

MONOMIALS = [(i, k - i) for k in range(6) for i in range(k, -1, -1)]
# derivative multi-indices (order in x, order in y), grouped by total order
DERIVATIVES = {r: [(r - j, j) for j in range(r + 1)] for r in range(5)}

# physical scaling exponent of each local functional
_FUNCTIONAL_ORDER = np.array([0, 1, 1, 2, 2, 2] * 3 + [1, 1, 1])
_VERTEX_DERIVS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def _falling(n: int, k: int) -> int:
    return factorial(n) // factorial(n - k)


def monomial_derivatives(xi, eta, a: int, b: int) -> np.ndarray:
    """Derivative d^a/dxi^a d^b/deta^b of the 21 monomials, shape (..., 21)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    out = np.zeros(xi.shape + (21,))
    xp = [np.ones_like(xi)]
    ep = [np.ones_like(eta)]
    for _ in range(5):
        xp.append(xp[-1] * xi)
        ep.append(ep[-1] * eta)
    for m, (i, j) in enumerate(MONOMIALS):
        if i >= a and j >= b:
            out[..., m] = _falling(i, a) * _falling(j, b) * xp[i - a] * ep[j - b]
    return out


@dataclass(frozen=True)
class DofLayout:
    """Global numbering: 6 DOFs per vertex first, then one per edge."""

    element_dofs: np.ndarray  # (nt, 21)
    n_vertices: int
    n_edges: int
    edge_normals: np.ndarray  # (ne, 2)
    edge_signs: np.ndarray  # (nt, 3) global normal = sign * outward normal

    @property
    def n_dofs(self) -> int:
        return 6 * self.n_vertices + self.n_edges

    def vertex_dof(self, vertex: int, k: int) -> int:
        return 6 * vertex + k

    def edge_dof(self, edge: int) -> int:
        return 6 * self.n_vertices + edge


def build_dof_layout(mesh: Mesh) -> DofLayout:
    t = mesh.triangles
    vdofs = (6 * t[:, :, None] + np.arange(6)[None, None, :]).reshape(-1, 18)
    edofs = 6 * mesh.n_vertices + mesh.triangle_edges
    signs = np.where(t < np.roll(t, -1, axis=1), 1.0, -1.0)
    return DofLayout(
        element_dofs=np.hstack([vdofs, edofs]),
        n_vertices=mesh.n_vertices,
        n_edges=mesh.n_edges,
        edge_normals=mesh.edge_normals,
        edge_signs=signs,
    )


def _coefficients(vertices: np.ndarray, edge_normals: np.ndarray):
    """Monomial coefficients of the shape functions for a batch of triangles.

    vertices: (n, 3, 2); edge_normals: (n, 3, 2) normals of the edge DOFs.
    Returns (C, centers, scales) with C of shape (n, 21, 21) such that shape
    function j equals sum_m C[m, j] * monomial_m(xi).
    """
    vertices = np.asarray(vertices, dtype=float)
    centers = vertices.mean(axis=1)
    d = np.roll(vertices, -1, axis=1) - vertices
    lengths = np.hypot(d[..., 0], d[..., 1])
    scales = lengths.max(axis=1)
    area = 0.5 * (d[:, 0, 0] * (-d[:, 2, 1]) - d[:, 0, 1] * (-d[:, 2, 0]))
    if np.any(np.abs(area) <= 1e-10 * scales**2):
        raise ValueError("degenerate triangle: area is negligible relative to its diameter")
    local = (vertices - centers[:, None, :]) / scales[:, None, None]
    mids = 0.5 * (local + np.roll(local, -1, axis=1))
    n = len(vertices)
    V = np.empty((n, 21, 21))
    for k in range(3):
        for r, (a, b) in enumerate(_VERTEX_DERIVS):
            V[:, 6 * k + r, :] = monomial_derivatives(local[:, k, 0], local[:, k, 1], a, b)
    for k in range(3):
        dx = monomial_derivatives(mids[:, k, 0], mids[:, k, 1], 1, 0)
        dy = monomial_derivatives(mids[:, k, 0], mids[:, k, 1], 0, 1)
        V[:, 18 + k, :] = edge_normals[:, k, 0:1] * dx + edge_normals[:, k, 1:2] * dy
    C = np.linalg.inv(V)
    C *= scales[:, None, None] ** _FUNCTIONAL_ORDER[None, None, :]
    return C, centers, scales


@dataclass(frozen=True)
class ElementBasis:
    """Shape functions of one triangle tabulated at quadrature points.

    ``derivatives[r]`` has shape (r + 1, nq, 21): the order-r partial
    derivatives in the order of ``DERIVATIVES[r]`` (x-heavy first).
    """

    triangle: int
    points: np.ndarray
    weights: np.ndarray
    derivatives: dict
    coefficients: np.ndarray
    center: np.ndarray
    scale: float

    @property
    def values(self) -> np.ndarray:
        return self.derivatives[0][0]

    def evaluate(self, points, order: int = 0) -> np.ndarray:
        """Order-``order`` derivatives of all 21 shape functions at arbitrary
        points, shape (order + 1, npts, 21)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        xi = (points - self.center) / self.scale
        return np.stack(
            [
                monomial_derivatives(xi[:, 0], xi[:, 1], a, b) @ self.coefficients
                / self.scale**order
                for a, b in DERIVATIVES[order]
            ]
        )


def element_basis(
    geometry: ElementGeometry, rule: QuadratureRule, max_order: int = 4
) -> ElementBasis:
    """Argyris shape functions of one element at the points of ``rule``."""
    if not 0 <= max_order <= 4:
        raise ValueError("derivatives up to order 4 are supported")
    ids = np.asarray(geometry.vertex_ids)
    signs = np.where(ids < np.roll(ids, -1), 1.0, -1.0)
    normals = geometry.normals * signs[:, None]
    C, centers, scales = _coefficients(geometry.vertices[None], normals[None])
    pts, wts = rule.physical(geometry.vertices)
    basis = ElementBasis(
        triangle=geometry.triangle,
        points=pts,
        weights=wts,
        derivatives={},
        coefficients=C[0],
        center=centers[0],
        scale=float(scales[0]),
    )
    for r in range(max_order + 1):
        basis.derivatives[r] = basis.evaluate(pts, r)
    return basis


class ArgyrisSpace:
    """The global H^2-conforming quintic space on a mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.layout = build_dof_layout(mesh)
        p = mesh.vertices[mesh.triangles]
        d = np.roll(p, -1, axis=1) - p
        lengths = np.hypot(d[..., 0], d[..., 1])
        outward = np.stack([d[..., 1], -d[..., 0]], axis=2) / lengths[..., None]
        self.coefficients, self.centers, self.scales = _coefficients(
            p, outward * self.layout.edge_signs[..., None]
        )

    @property
    def n_dofs(self) -> int:
        return self.layout.n_dofs

    def local_points(self, rule: QuadratureRule) -> np.ndarray:
        """Physical quadrature points (nt, nq, 2) and weights (nt, nq)."""
        p = self.mesh.vertices[self.mesh.triangles]
        pts = np.einsum("qk,tkd->tqd", rule.points, p)
        return pts, rule.weights[None, :] * self.mesh.areas[:, None]

    def combination(self, elements, points, terms: dict) -> np.ndarray:
        """Linear combination ``sum c * d^(a,b)`` of shape-function derivatives.

        ``elements`` has shape S and ``points`` either S + (2,) (one point per
        element entry) or S + (nq, 2) (nq points per element).  ``terms`` maps
        (a, b) -> coefficient.  Returns points.shape[:-1] + (21,).
        """
        elements = np.asarray(elements)
        points = np.asarray(points, dtype=float)
        per_element = points.ndim - 1 > elements.ndim
        el = elements[..., None] if per_element else elements
        h = self.scales[el][..., None]
        xi = (points - self.centers[el]) / h
        acc = 0.0
        for (a, b), c in terms.items():
            if c != 0:
                acc = acc + c * monomial_derivatives(xi[..., 0], xi[..., 1], a, b) / h ** (a + b)
        C = self.coefficients[elements]
        if per_element:
            return np.einsum("...qm,...mj->...qj", acc, C)
        return np.einsum("...m,...mj->...j", acc, C)

    def derivatives(self, elements, points, order: int) -> np.ndarray:
        """All order-``order`` derivatives, shape (order + 1,) + combination shape."""
        return np.stack(
            [self.combination(elements, points, {ab: 1.0}) for ab in DERIVATIVES[order]]
        )

    def bilaplacian(self, elements, points) -> np.ndarray:
        return self.combination(elements, points, {(4, 0): 1.0, (2, 2): 2.0, (0, 4): 1.0})

    def on_rule(self, rule: QuadratureRule, orders=(0, 2)) -> dict:
        """Shape-function derivatives at the rule's points in every element;
        entry ``r`` has shape (r + 1, nt, nq, 21)."""
        pts, _ = self.local_points(rule)
        elements = np.arange(self.mesh.n_triangles)
        return {r: self.derivatives(elements, pts, r) for r in orders}

    # ---- fields ----------------------------------------------------------
    def element_values(self, dofs) -> np.ndarray:
        """Local DOF vectors (nt, 21) of a global vector."""
        return np.asarray(dofs)[self.layout.element_dofs]

    def evaluate(self, dofs, elements, points, order: int = 0) -> np.ndarray:
        """Order-``order`` derivatives of the field at points in given elements,
        shape (order + 1, npts)."""
        elements = np.asarray(elements)
        phi = self.derivatives(elements, points, order)
        return np.einsum("r...j,...j->r...", phi, self.element_values(dofs)[elements])

    @cached_property
    def _bboxes(self):
        p = self.mesh.vertices[self.mesh.triangles]
        return p.min(axis=1), p.max(axis=1)

    def locate(self, points, tol: float = 1e-12) -> np.ndarray:
        """Element containing each point (first match), -1 outside the mesh."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        owner = -np.ones(len(points), dtype=np.int64)
        order = np.argsort(points[:, 0], kind="stable")
        xs = points[order, 0]
        lo, hi = self._bboxes
        tri = self.mesh.vertices[self.mesh.triangles]
        for e in range(self.mesh.n_triangles):
            i0 = np.searchsorted(xs, lo[e, 0] - tol, side="left")
            i1 = np.searchsorted(xs, hi[e, 0] + tol, side="right")
            if i0 == i1:
                continue
            cand = order[i0:i1]
            cand = cand[owner[cand] < 0]
            if cand.size == 0:
                continue
            y = points[cand, 1]
            cand = cand[(y >= lo[e, 1] - tol) & (y <= hi[e, 1] + tol)]
            if cand.size == 0:
                continue
            a, b, c = tri[e]
            q = points[cand]
            det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            l1 = ((q[:, 0] - a[0]) * (c[1] - a[1]) - (q[:, 1] - a[1]) * (c[0] - a[0])) / det
            l2 = ((b[0] - a[0]) * (q[:, 1] - a[1]) - (b[1] - a[1]) * (q[:, 0] - a[0])) / det
            inside = (l1 >= -tol) & (l2 >= -tol) & (l1 + l2 <= 1 + tol)
            owner[cand[inside]] = e
        return owner


def interpolate(space: ArgyrisSpace, fn: Callable) -> np.ndarray:
    """Global DOF vector matching every DOF functional of a smooth function.

    ``fn(x, y)`` returns ``(u, u_x, u_y, u_xx, u_xy, u_yy)`` (vectorised).  The
    edge DOFs use the normal derivative at the edge midpoints.
    """
    mesh = space.mesh
    layout = space.layout
    out = np.empty(layout.n_dofs)
    v = mesh.vertices
    vals = [np.broadcast_to(np.asarray(c, dtype=float), (mesh.n_vertices,)) for c in fn(v[:, 0], v[:, 1])]
    out[: 6 * mesh.n_vertices] = np.stack(vals, axis=1).ravel()
    mid = v[mesh.edges].mean(axis=1)
    d = fn(mid[:, 0], mid[:, 1])
    ux = np.broadcast_to(np.asarray(d[1], dtype=float), (mesh.n_edges,))
    uy = np.broadcast_to(np.asarray(d[2], dtype=float), (mesh.n_edges,))
    n = layout.edge_normals
    out[6 * mesh.n_vertices :] = ux * n[:, 0] + uy * n[:, 1]
    return out
