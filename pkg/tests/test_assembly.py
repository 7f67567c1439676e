"""Nitsche system assembly, clamped constraints and the linear solve."""
import numpy as np
import pytest
import scipy.sparse as sp

from kirchhoff_obstacle.argyris import interpolate
from kirchhoff_obstacle.assembly import (
    ContactState,
    Discretisation,
    SolverError,
    assemble_energy,
    assemble_nitsche,
    contact_state,
    reaction,
    solve,
    weighted_gram,
)
from kirchhoff_obstacle.mesh import build_structured_unit_square
from kirchhoff_obstacle.plate import PlateModel
from kirchhoff_obstacle.problem import ObstacleProblem
from oracles import Polynomial, dense_nitsche


def random_contact(disc, rng, p=0.4):
    chi = rng.random(disc.quad.weights.shape) < p
    return ContactState(chi.astype(float), chi)


def reduced(disc, K, b):
    P = disc.constraints.prolongation.toarray()
    return P.T @ K @ P, P.T @ b


def obstacle(x, y):
    return 0.05 * np.sin(3 * x) * np.cos(2 * y) - 0.01


@pytest.fixture(scope="module")
def small():
    mesh = build_structured_unit_square(2)
    return mesh, Discretisation(mesh, PlateModel(nu=0.2))


@pytest.mark.parametrize("eps", [0.0, 1e-4])
def test_system_matches_dense_term_by_term_oracle(small, rng, eps):
    mesh, disc = small
    problem = ObstacleProblem(f=lambda x, y: 1 + x * y, g=obstacle, eps=eps, alpha=1e-2, model=disc.model)
    for p in (0.0, 0.3, 1.0):
        state = random_contact(disc, rng, p)
        system = assemble_nitsche(problem, disc, state)
        K, b = reduced(disc, *dense_nitsche(problem, mesh, state.chi))
        scale = np.abs(K).max()
        assert np.abs(system.matrix.toarray() - K).max() <= 1e-11 * scale
        assert np.abs(system.rhs - b).max() <= 1e-11 * np.abs(b).max()


def test_no_contact_system_is_stabilised_source_problem(small):
    mesh, disc = small
    problem = ObstacleProblem(f=-10.0, g=obstacle, alpha=1e-5, model=disc.model)
    system = assemble_nitsche(problem, disc, None)
    q = disc.quad
    beta = problem.alpha * q.h**4
    stab = disc.scatter(weighted_gram(q.weights, q.a_phi) * beta[:, None, None])
    P = disc.constraints.prolongation
    expected = P.T @ (assemble_energy(disc) - stab) @ P
    assert abs(system.matrix - expected).max() <= 1e-12 * abs(expected).max()
    load = disc.scatter_vector(np.einsum("tq,tqj->tj", -10.0 * q.weights, q.phi - beta[:, None, None] * q.a_phi))
    assert np.allclose(system.rhs, P.T @ load, rtol=1e-12, atol=1e-14)


def test_matrix_is_symmetric_for_random_contact_states(small, rng):
    _, disc = small
    problem = ObstacleProblem(f=1.0, g=obstacle, eps=1e-3, model=disc.model)
    for _ in range(5):
        A = assemble_nitsche(problem, disc, random_contact(disc, rng)).matrix
        assert abs(A - A.T).max() <= 1e-10 * abs(A).max()


def test_full_contact_rigid_operator_is_symmetric(small):
    _, disc = small
    problem = ObstacleProblem(f=1.0, g=0.0, eps=0.0, model=disc.model)
    chi = np.ones(disc.quad.weights.shape, dtype=bool)
    A = assemble_nitsche(problem, disc, ContactState(chi * 1.0, chi)).matrix
    assert abs(A - A.T).max() <= 1e-10 * abs(A).max()


def test_rhs_is_linear_in_load_and_obstacle(small, rng):
    _, disc = small
    state = random_contact(disc, rng)
    f1, f2 = (lambda x, y: x**2 - y), (lambda x, y: 3 + 0 * x)
    g1, g2 = obstacle, (lambda x, y: x * y)

    def rhs(f, g):
        return assemble_nitsche(ObstacleProblem(f=f, g=g, eps=1e-4, model=disc.model), disc, state).rhs

    both = rhs(lambda x, y: 2 * f1(x, y) + f2(x, y), lambda x, y: 2 * g1(x, y) + g2(x, y))
    assert np.allclose(both, 2 * rhs(f1, g1) + rhs(f2, g2), rtol=1e-12, atol=1e-12 * np.abs(both).max())


@pytest.mark.parametrize("alpha", [1.0, 1e-5])
def test_small_compliance_limit_is_continuous(small, rng, alpha):
    """The contact entries scale with 1 / (eps + beta), so switching eps from 0
    to 1e-12 changes them by the relative amount 1e-12 / beta."""
    _, disc = small
    state = random_contact(disc, rng)
    rigid = assemble_nitsche(ObstacleProblem(f=-10.0, g=obstacle, eps=0.0, alpha=alpha, model=disc.model), disc, state)
    soft = assemble_nitsche(ObstacleProblem(f=-10.0, g=obstacle, eps=1e-12, alpha=alpha, model=disc.model), disc, state)
    bound = max(1e-9, 2e-12 / (alpha * disc.mesh.diameters.min() ** 4))
    assert abs(rigid.matrix - soft.matrix).max() <= bound * abs(rigid.matrix).max()
    assert np.abs(rigid.rhs - soft.rhs).max() <= bound * np.abs(rigid.rhs).max()


def test_reaction_examples():
    rigid = ObstacleProblem(f=0.0, g=1.0, eps=0.0, alpha=1.0)
    assert reaction(rigid, 1.0, 0.0, 0.0, 0.0, 1.0) == pytest.approx(1.0)
    deep = ObstacleProblem(f=-10.0, g=-1e6, eps=1e-3)
    mesh = build_structured_unit_square(2)
    disc = Discretisation(mesh, deep.model)
    state = contact_state(deep, disc, np.random.default_rng(1).standard_normal(disc.space.n_dofs))
    assert not state.chi.any() and np.all(state.reaction == 0)


def test_clamped_constraints_counts_by_enumeration():
    mesh = build_structured_unit_square(2)
    disc = Discretisation(mesh, PlateModel())
    # boundary vertices lose u, grad u and either 2 (edge) or 3 (corner) Hessian directions;
    # boundary edges lose their normal-derivative DOF
    v = mesh.vertices
    on_x = np.isclose(v[:, 0], 0) | np.isclose(v[:, 0], 1)
    on_y = np.isclose(v[:, 1], 0) | np.isclose(v[:, 1], 1)
    corners = np.sum(on_x & on_y)
    sides = np.sum(on_x ^ on_y)
    removed = corners * 6 + sides * 5 + mesh.boundary_edges.sum()
    assert disc.space.n_dofs == 70
    assert disc.n_free == 70 - removed == 18


@pytest.mark.parametrize("n, free", [(4, 106), (8, 498)])
def test_free_counts_on_larger_squares(n, free):
    assert Discretisation(build_structured_unit_square(n), PlateModel()).n_free == free


def test_hessian_directions_kept_at_boundary_vertices():
    mesh = build_structured_unit_square(2)
    disc = Discretisation(mesh, PlateModel())
    P = disc.constraints.prolongation.toarray()
    bottom_mid = int(np.flatnonzero(np.all(np.isclose(mesh.vertices, [0.5, 0.0]), axis=1))[0])
    corner = int(np.flatnonzero(np.all(np.isclose(mesh.vertices, [0.0, 0.0]), axis=1))[0])
    rows = P[6 * bottom_mid : 6 * bottom_mid + 6]
    # only u_yy survives on a horizontal edge
    assert np.all(rows[:5] == 0) and np.any(rows[5] != 0)
    assert np.all(P[6 * corner : 6 * corner + 6] == 0)


def test_constrained_fields_vanish_with_normal_derivative_on_boundary(rng):
    mesh = build_structured_unit_square(3)
    disc = Discretisation(mesh, PlateModel())
    u = disc.expand(rng.standard_normal(disc.n_free))
    t = rng.random(20)
    side = rng.integers(0, 4, 20)
    pts = np.where(side[:, None] == 0, np.c_[t, 0 * t], 0)
    pts = np.where(side[:, None] == 1, np.c_[1 + 0 * t, t], pts)
    pts = np.where(side[:, None] == 2, np.c_[t, 1 + 0 * t], pts)
    pts = np.where(side[:, None] == 3, np.c_[0 * t, t], pts)
    el = disc.space.locate(pts)
    vals = disc.space.evaluate(u, el, pts, 0)[0]
    grad = disc.space.evaluate(u, el, pts, 1)
    normal = np.where(side % 2 == 0, grad[1], grad[0])
    scale = np.abs(u).max()
    assert np.abs(vals).max() <= 1e-10 * scale
    assert np.abs(normal).max() <= 1e-10 * scale


def test_solve_examples(rng):
    b = rng.standard_normal(7)
    assert np.allclose(solve((sp.identity(7), b)), b)
    B = rng.standard_normal((50, 50))
    A = B @ B.T + 50 * np.eye(50)
    x = solve((sp.csr_matrix(A), b := rng.standard_normal(50)))
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_singular_system_reports_condition():
    A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SolverError) as info:
        solve((A, np.array([1.0, 0.0])))
    assert "factor" in str(info.value) or info.value.condition is None or info.value.condition > 1e12


def test_source_problem_solution_is_galerkin_orthogonal(rng):
    mesh = build_structured_unit_square(4)
    problem = ObstacleProblem(f=lambda x, y: np.sin(3 * x) + y)
    disc = Discretisation(mesh, problem.model)
    system = assemble_nitsche(problem, disc)
    x = solve(system)
    A = system.matrix
    r = A @ x - system.rhs
    xnorm = np.sqrt(x @ A @ x)
    for _ in range(100):
        v = rng.standard_normal(len(x))
        assert abs(v @ r) <= 1e-8 * np.sqrt(abs(v @ A @ v)) * xnorm


def test_interpolated_quintic_satisfies_clamped_equations(rng):
    """With f = A(p) for a quintic p, the interpolant of p annihilates the
    stabilised residual against every clamped test function.

    No nonzero quintic is itself clamped on a polygon, so this is the
    consistency statement that can be checked exactly.
    """
    mesh = build_structured_unit_square(3)
    model = PlateModel(nu=0.3)
    for _ in range(3):
        p = Polynomial.random(rng, 5)
        bilap = lambda x, y: model.D * (p.d(4, 0)(x, y) + 2 * p.d(2, 2)(x, y) + p.d(0, 4)(x, y))
        problem = ObstacleProblem(f=bilap, model=model)
        disc = Discretisation(mesh, model)
        q = disc.quad
        beta = problem.alpha * q.h**4
        stab = disc.scatter(weighted_gram(q.weights, q.a_phi) * beta[:, None, None])
        K = assemble_energy(disc) - stab
        f = problem.load(q.points[..., 0], q.points[..., 1])
        load = disc.scatter_vector(np.einsum("tq,tqj->tj", f * q.weights, q.phi - beta[:, None, None] * q.a_phi))
        P = disc.constraints.prolongation
        u = interpolate(disc.space, p.jet)
        r = P.T @ (K @ u - load)
        assert np.abs(r).max() <= 1e-9 * np.abs(P.T @ (K @ u)).max()
