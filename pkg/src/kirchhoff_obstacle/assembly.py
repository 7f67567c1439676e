"""Global assembly of the plate stiffness and the stabilised Nitsche system.

Contact is decided pointwise at triangle quadrature points.  With
``beta = alpha h_K^4`` and ``c = 1 / (eps + beta)`` the bilinear form for a
frozen contact indicator ``chi`` reads, point by point::

    a(u, v) + chi c (u, v) - chi c beta [(A u, v) + (u, A v)]
            - chi eps beta c (A u, A v) - (1 - chi) beta (A u, A v)

and the load functional::

    (f + chi c (g - beta f), v) - (chi c beta g + chi eps beta c f + (1 - chi) beta f, A v)

Clamped conditions are imposed strongly through a sparse prolongation ``P``
from free coefficients to the full Argyris DOF vector, so every reduced
system is ``P^T K P x = P^T b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, onenormest, splu

from .argyris import ArgyrisSpace
from .mesh import Mesh
from .plate import PlateModel
from .problem import ObstacleProblem
from .quadrature import triangle_quadrature

__all__ = [
    "SolverError",
    "Discretisation",
    "QuadratureData",
    "ClampedConstraints",
    "ContactState",
    "LinearSystem",
    "apply_clamped_bcs",
    "contact_state",
    "assemble_energy",
    "assemble_nitsche",
    "solve",
]

QUADRATURE_DEGREE = 10
# A non-symmetric rule keeps the contact decision free of exact ties between
# quadrature points mirrored across the mesh.
QUADRATURE_FAMILY = "collapsed"
RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    """A linear solve failed; ``condition`` carries a 1-norm estimate if available."""

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class QuadratureData:
    """Shape-function tables at the triangle quadrature points of a mesh.

    Attributes
    ----------
    points : (nt, nq, 2) physical points
    weights : (nt, nq) physical weights
    phi : (nt, nq, 21) values
    hess : (3, nt, nq, 21) second derivatives (xx, xy, yy)
    a_phi : (nt, nq, 21) ``A(phi) = D lap^2 phi``
    h : (nt,) element diameters
    """

    def __init__(
        self,
        space: ArgyrisSpace,
        model: PlateModel,
        degree: int = QUADRATURE_DEGREE,
        family: str = QUADRATURE_FAMILY,
    ):
        rule = triangle_quadrature(degree, family)
        self.rule = rule
        self.points, self.weights = space.local_points(rule)
        el = np.arange(space.mesh.n_triangles)
        self.phi = space.combination(el, self.points, {(0, 0): 1.0})
        self.hess = space.derivatives(el, self.points, 2)
        self.a_phi = model.D * space.bilaplacian(el, self.points)
        self.h = space.mesh.diameters

    def values(self, local: np.ndarray) -> np.ndarray:
        """Field values at the points given local DOF vectors (nt, 21)."""
        return np.einsum("tqj,tj->tq", self.phi, local)

    def biharmonic(self, local: np.ndarray) -> np.ndarray:
        return np.einsum("tqj,tj->tq", self.a_phi, local)


@dataclass(frozen=True)
class ClampedConstraints:
    """Strong clamped conditions as a prolongation.

    ``prolongation`` maps free coefficients to global DOFs; ``constrained``
    lists the global DOFs that are not free on their own (fully removed or
    restricted to a null direction of the vertex constraints).
    """

    prolongation: sp.csr_matrix
    constrained: np.ndarray

    @property
    def n_free(self) -> int:
        return self.prolongation.shape[1]


def _hessian_constraint_rows(s: np.ndarray) -> np.ndarray:
    """Rows of ``u_ss`` and ``u_sn`` in terms of ``(u_xx, u_xy, u_yy)``."""
    sx, sy = s
    return np.array(
        [
            [sx * sx, 2 * sx * sy, sy * sy],
            [sx * sy, sy * sy - sx * sx, -sx * sy],
        ]
    )


def apply_clamped_bcs(space: ArgyrisSpace) -> ClampedConstraints:
    """Constrain value and normal derivative to vanish on the whole boundary.

    At a boundary vertex the value, the gradient and, for each incident
    boundary edge, the second derivatives ``u_ss`` and ``u_sn`` in that
    edge's frame are zero; the remaining Hessian freedom (if any) becomes one
    free coefficient along the null direction.  Boundary edge DOFs are removed.
    """
    mesh = space.mesh
    layout = space.layout
    n_total = layout.n_dofs
    bverts = np.flatnonzero(mesh.boundary_vertices)
    bedges = np.flatnonzero(mesh.boundary_edges)
    tangents = {}
    for e in bedges:
        a, b = mesh.edges[e]
        d = mesh.vertices[b] - mesh.vertices[a]
        d = d / np.hypot(*d)
        tangents.setdefault(a, []).append(d)
        tangents.setdefault(b, []).append(d)

    removed = np.zeros(n_total, dtype=bool)
    extra_cols = []  # (dofs, coefficients)
    for v in bverts:
        base = layout.vertex_dof(v, 0)
        removed[base : base + 6] = True
        rows = np.vstack([_hessian_constraint_rows(s) for s in tangents[v]])
        _, sv, vt = np.linalg.svd(rows)
        rank = int(np.sum(sv > 1e-10 * sv[0]))
        for null in vt[rank:]:
            null = np.where(np.abs(null) < 1e-14, 0.0, null)
            null = null * np.sign(null[np.argmax(np.abs(null))])
            extra_cols.append((base + 3 + np.arange(3), null))
    removed[layout.edge_dof(0) + bedges] = True

    free = np.flatnonzero(~removed)
    rows = [free]
    cols = [np.arange(len(free))]
    vals = [np.ones(len(free))]
    for k, (dofs, coef) in enumerate(extra_cols):
        nz = coef != 0
        rows.append(dofs[nz])
        cols.append(np.full(nz.sum(), len(free) + k))
        vals.append(coef[nz])
    P = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_total, len(free) + len(extra_cols)),
    )
    return ClampedConstraints(P, np.flatnonzero(removed))


class Discretisation:
    """Argyris space, quadrature tables and constraints for one mesh."""

    def __init__(
        self,
        mesh: Mesh,
        model: PlateModel,
        degree: int = QUADRATURE_DEGREE,
        family: str = QUADRATURE_FAMILY,
    ):
        self.mesh = mesh
        self.model = model
        self.space = ArgyrisSpace(mesh)
        self.degree = degree
        self.family = family

    @cached_property
    def quad(self) -> QuadratureData:
        return QuadratureData(self.space, self.model, self.degree, self.family)

    @cached_property
    def constraints(self) -> ClampedConstraints:
        return apply_clamped_bcs(self.space)

    @cached_property
    def energy_matrix(self) -> sp.csr_matrix:
        """Reduced stiffness of ``a(., .)`` over the free coefficients."""
        P = self.constraints.prolongation
        return (P.T @ assemble_energy(self) @ P).tocsr()

    @property
    def n_free(self) -> int:
        return self.constraints.n_free

    def expand(self, free_values) -> np.ndarray:
        return self.constraints.prolongation @ np.asarray(free_values, dtype=float)

    def scatter(self, local: np.ndarray) -> sp.csr_matrix:
        """Sum element matrices (nt, 21, 21) into a global sparse matrix."""
        dofs = self.space.layout.element_dofs
        r = np.broadcast_to(dofs[:, :, None], local.shape)
        c = np.broadcast_to(dofs[:, None, :], local.shape)
        n = self.space.n_dofs
        return sp.coo_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=(n, n)).tocsr()

    def scatter_vector(self, local: np.ndarray) -> np.ndarray:
        return np.bincount(
            self.space.layout.element_dofs.ravel(), weights=local.ravel(), minlength=self.space.n_dofs
        )


def weighted_gram(w: np.ndarray, A: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    """Batched ``sum_q w[t, q] A[t, q, i] B[t, q, j]``, shape (nt, 21, 21)."""
    B = A if B is None else B
    return np.matmul((A * w[..., None]).transpose(0, 2, 1), B)


def element_energy_matrices(disc: Discretisation) -> np.ndarray:
    q = disc.quad
    D, nu = disc.model.D, disc.model.nu
    hxx, hxy, hyy = q.hess
    w = q.weights
    K = weighted_gram(w, hxx) + weighted_gram(w, hyy)
    if nu != 0:
        cross = weighted_gram(w, hxx, hyy)
        K += nu * (cross + cross.transpose(0, 2, 1))
    K += 2.0 * (1.0 - nu) * weighted_gram(w, hxy)
    return D * K


def assemble_energy(disc: Discretisation) -> sp.csr_matrix:
    """Full (unconstrained) stiffness matrix of ``a(u, v)``."""
    return disc.scatter(element_energy_matrices(disc))


@dataclass(frozen=True)
class ContactState:
    """Reaction ``F(w)`` and contact indicator at every quadrature point (nt, nq)."""

    reaction: np.ndarray
    chi: np.ndarray

    @property
    def fraction(self) -> float:
        return float(self.chi.mean())

    @classmethod
    def empty(cls, shape) -> "ContactState":
        return cls(np.zeros(shape), np.zeros(shape, dtype=bool))


def _stabilisation(problem: ObstacleProblem, h: np.ndarray):
    beta = problem.alpha * h**4
    return beta, 1.0 / (problem.eps + beta)


def _point_data(problem: ObstacleProblem, disc: Discretisation):
    """Load and obstacle at the quadrature points, cached per discretisation."""
    key = (id(problem.f), id(problem.g))
    cache = disc.__dict__.setdefault("_point_data", {})
    if key not in cache:
        x, y = disc.quad.points[..., 0], disc.quad.points[..., 1]
        # the entry keeps f and g alive so their ids cannot be reused
        cache[key] = (problem.f, problem.g, problem.load(x, y), problem.obstacle(x, y))
    return cache[key][2:]


def reaction(problem: ObstacleProblem, h, w, a_w, f, g) -> np.ndarray:
    """``F(w) = (g - w + beta (A(w) - f))_+ / (eps + beta)`` pointwise.

    ``h`` broadcasts against the point arrays (one entry per element row).
    """
    beta, c = _stabilisation(problem, np.asarray(h, dtype=float))
    if beta.ndim == 1 and np.ndim(w) == 2:
        beta, c = beta[:, None], c[:, None]
    with np.errstate(invalid="ignore"):
        r = c * (g - w + beta * (a_w - f))
    return np.where(r > 0, r, 0.0)


def contact_state(problem: ObstacleProblem, disc: Discretisation, dofs) -> ContactState:
    """Reaction force and contact indicator of the displacement ``dofs``."""
    q = disc.quad
    if not problem.has_obstacle:
        return ContactState.empty(q.weights.shape)
    local = disc.space.element_values(dofs)
    f, g = _point_data(problem, disc)
    F = reaction(problem, q.h, q.values(local), q.biharmonic(local), f, g)
    return ContactState(F, F > 0)


@dataclass(frozen=True)
class LinearSystem:
    """Reduced symmetric system over the free coefficients."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    constraints: ClampedConstraints

    @property
    def n_free(self) -> int:
        return self.matrix.shape[0]

    def expand(self, x) -> np.ndarray:
        return self.constraints.prolongation @ x


def nitsche_point_coefficients(problem: ObstacleProblem, disc: Discretisation, chi):
    """Pointwise weights of the (phi, phi), (A phi, phi) and (A phi, A phi) terms
    and of the two load terms, each of shape (nt, nq)."""
    q = disc.quad
    beta, c = _stabilisation(problem, q.h)
    beta, c = beta[:, None], c[:, None]
    chi = np.asarray(chi, dtype=float)
    eps = problem.eps
    f, g = _point_data(problem, disc)
    g = np.where(chi > 0, g, 0.0)
    w = q.weights
    k_uv = w * chi * c
    k_av = -w * chi * c * beta
    k_aa = -w * (chi * eps * beta * c + (1.0 - chi) * beta)
    b_v = w * (f + chi * c * (g - beta * f))
    b_a = -w * (chi * c * beta * g + chi * eps * beta * c * f + (1.0 - chi) * beta * f)
    return k_uv, k_av, k_aa, b_v, b_a


def _base_matrix(problem: ObstacleProblem, disc: Discretisation) -> sp.csr_matrix:
    """Reduced ``a(u, v) - beta (A u, A v)``, the system without contact (cached per alpha)."""
    cache = disc.__dict__.setdefault("_base_matrices", {})
    if problem.alpha not in cache:
        q = disc.quad
        beta, _ = _stabilisation(problem, q.h)
        stab = weighted_gram(q.weights, q.a_phi) * beta[:, None, None]
        P = disc.constraints.prolongation
        cache[problem.alpha] = disc.energy_matrix - (P.T @ disc.scatter(stab) @ P).tocsr()
    return cache[problem.alpha]


def assemble_nitsche(problem: ObstacleProblem, disc: Discretisation, contact: ContactState | None = None) -> LinearSystem:
    """Stabilised Nitsche system for a frozen contact indicator."""
    q = disc.quad
    chi = np.zeros(q.weights.shape) if contact is None else contact.chi
    k_uv, k_av, k_aa, b_v, b_a = nitsche_point_coefficients(problem, disc, chi)
    phi, aphi = q.phi, q.a_phi
    P = disc.constraints.prolongation
    A = _base_matrix(problem, disc)
    touched = np.flatnonzero(np.any(chi, axis=1))
    if touched.size:
        # only elements with contact points differ from the base matrix
        beta, _ = _stabilisation(problem, q.h[touched])
        d_aa = k_aa[touched] + q.weights[touched] * beta[:, None]
        K = weighted_gram(k_uv[touched], phi[touched]) + weighted_gram(d_aa, aphi[touched])
        cross = weighted_gram(k_av[touched], aphi[touched], phi[touched])
        K += cross + cross.transpose(0, 2, 1)
        dofs = disc.space.layout.element_dofs[touched]
        r = np.broadcast_to(dofs[:, :, None], K.shape).ravel()
        c = np.broadcast_to(dofs[:, None, :], K.shape).ravel()
        n = disc.space.n_dofs
        corr = sp.coo_matrix((K.ravel(), (r, c)), shape=(n, n)).tocsr()
        A = (A + P.T @ corr @ P).tocsr()
    b = np.matmul(b_v[:, None, :], phi)[:, 0] + np.matmul(b_a[:, None, :], aphi)[:, 0]
    return LinearSystem(A, P.T @ disc.scatter_vector(b), disc.constraints)


def _condition_estimate(A: sp.spmatrix, lu=None) -> float | None:
    try:
        if lu is None:
            lu = splu(sp.csc_matrix(A))
        inv = LinearOperator(A.shape, matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="T"))
        return float(onenormest(A) * onenormest(inv))
    except Exception:  # the estimate is only a diagnostic
        return None


def solve(system: LinearSystem | tuple, tol: float = RESIDUAL_TOL) -> np.ndarray:
    """Direct sparse solve with a relative residual check.

    Accepts a :class:`LinearSystem` (returns the reduced solution) or a
    ``(matrix, rhs)`` pair.  One step of iterative refinement is applied if
    the first residual misses ``tol``.

    Raises
    ------
    SolverError
        If the factorisation fails or the residual stays above ``tol``.
    """
    if isinstance(system, LinearSystem):
        A, b = system.matrix, system.rhs
    else:
        A, b = system
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        return np.zeros(0)
    try:
        lu = splu(A)
    except RuntimeError as exc:
        raise SolverError(f"factorisation failed: {exc}", _condition_estimate(A)) from exc
    x = lu.solve(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b)
    for _ in range(2):
        r = b - A @ x
        rel = np.linalg.norm(r) / bnorm
        if not np.isfinite(rel):
            break
        if rel <= tol:
            return x
        x = x + lu.solve(r)
    r = b - A @ x
    rel = np.linalg.norm(r) / bnorm
    if rel <= tol:
        return x
    cond = _condition_estimate(A, lu)
    raise SolverError(f"relative residual {rel:.3e} exceeds {tol:.1e} (condition estimate {cond})", cond)
