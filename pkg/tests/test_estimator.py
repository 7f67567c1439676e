"""Residual estimators, element indicators and maximum marking."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kirchhoff_obstacle.argyris import ArgyrisSpace, interpolate
from kirchhoff_obstacle.assembly import Discretisation
from kirchhoff_obstacle.estimator import (
    edge_integral,
    edge_jump_profiles,
    edge_residual,
    estimate,
    interior_integral,
    interior_residual,
    mark_elements,
    obstacle_integrals,
    obstacle_terms,
)
from kirchhoff_obstacle.mesh import build_mesh, build_structured_unit_square, uniform_refine
from kirchhoff_obstacle.plate import PlateModel
from kirchhoff_obstacle.problem import ObstacleProblem
from kirchhoff_obstacle.quadrature import edge_quadrature, triangle_quadrature
from kirchhoff_obstacle.solver import DiscreteSolution, solve_contact
from conftest import preset_problem
from oracles import Polynomial


def field(problem, mesh, dofs):
    return DiscreteSolution.from_dofs(problem, Discretisation(mesh, problem.model), dofs)


@pytest.fixture(scope="module")
def rigid():
    return solve_contact(preset_problem("rigid"), build_structured_unit_square(4))


def test_interior_residual_of_zero_field_under_constant_load():
    mesh = build_mesh([[0, 0], [0.25, 0], [0.1, 0.15]], [[0, 1, 2]])
    assert mesh.diameters[0] == pytest.approx(0.25)
    sol = field(ObstacleProblem(f=-10.0), mesh, np.zeros(21))
    expected = 0.25**2 * 10 * np.sqrt(mesh.areas[0])
    assert interior_residual(sol)[0] == pytest.approx(expected, rel=1e-13)
    assert interior_integral(np.array([0.5]), 0.25, np.array([-10.0])) == pytest.approx(0.25**2 * 10 * np.sqrt(0.5))


def test_interior_residual_against_degree_twelve_quadrature(rng):
    mesh = uniform_refine(build_structured_unit_square(2))
    model = PlateModel(nu=0.3)
    problem = ObstacleProblem(f=lambda x, y: 3 * x**2 - y + 1, model=model)
    space = ArgyrisSpace(mesh)
    u = rng.standard_normal(space.n_dofs)
    sol = field(problem, mesh, u)
    rule = triangle_quadrature(12)
    pts, wts = space.local_points(rule)
    el = np.arange(mesh.n_triangles)
    a_u = model.D * np.einsum("tqj,tj->tq", space.bilaplacian(el, pts), space.element_values(u))
    res = a_u - problem.load(pts[..., 0], pts[..., 1])
    oracle = mesh.diameters**2 * np.sqrt(np.sum(wts * res**2, axis=1))
    assert np.allclose(interior_residual(sol), oracle, rtol=1e-9)


def textbook_jumps(space, model, u, edge, t):
    """``[[M_nn]]`` and ``[[V_n]]`` from one-sided evaluations with
    ``M_nn = -D((1 - nu) n.H n + nu lap u)`` and
    ``V_n = -D(n . grad lap u + (1 - nu) T(s, s, n))``."""
    mesh = space.mesh
    a, b = mesh.vertices[mesh.edges[edge]]
    pts = a + t[:, None] * (b - a)
    D, nu = model.D, model.nu
    total_m = 0.0
    total_v = 0.0
    for k, tri in enumerate(mesh.edge_triangles[edge]):
        cen = mesh.centroids[tri]
        d = b - a
        n = np.array([d[1], -d[0]]) / np.hypot(*d)
        if n @ (0.5 * (a + b) - cen) < 0:
            n = -n
        s = np.array([-n[1], n[0]])
        el = np.full(len(t), tri)
        H = space.evaluate(u, el, pts, 2)
        T = space.evaluate(u, el, pts, 3)
        hess = lambda v, w: v[0] * w[0] * H[0] + (v[0] * w[1] + v[1] * w[0]) * H[1] + v[1] * w[1] * H[2]
        lap = H[0] + H[2]
        m_nn = -D * ((1 - nu) * hess(n, n) + nu * lap)
        grad_lap = np.stack([T[0] + T[2], T[1] + T[3]])
        sx, sy = s
        nx, ny = n
        tssn = (
            T[0] * sx * sx * nx
            + T[1] * (sx * sx * ny + 2 * sx * sy * nx)
            + T[2] * (sy * sy * nx + 2 * sx * sy * ny)
            + T[3] * sy * sy * ny
        )
        v_n = -D * (n @ grad_lap + (1 - nu) * tssn)
        total_m = total_m + (m_nn if k == 0 else -m_nn)
        total_v = total_v + v_n
    return total_m, total_v


def test_edge_residual_against_textbook_formula(rng):
    mesh = build_structured_unit_square(3)
    model = PlateModel(nu=0.3)
    space = ArgyrisSpace(mesh)
    u = rng.standard_normal(space.n_dofs)
    sol = field(ObstacleProblem(f=0.0, model=model), mesh, u)
    rule = edge_quadrature(39)
    edges = mesh.interior_edges
    expected = []
    for e in edges:
        jm, jv = textbook_jumps(space, model, u, e, rule.points)
        h = mesh.edge_lengths[e]
        expected.append(np.sqrt(h**3 * np.sum(h * rule.weights * jv**2) + h * np.sum(h * rule.weights * jm**2)))
    assert np.allclose(edge_residual(sol), expected, rtol=1e-9)


def test_smooth_field_has_no_edge_residual(rng):
    mesh = build_structured_unit_square(3)
    p = Polynomial.random(rng, 5)
    space = ArgyrisSpace(mesh)
    sol = field(ObstacleProblem(f=0.0), mesh, interpolate(space, p.jet))
    assert edge_residual(sol).max() <= 1e-8


def test_manufactured_unit_moment_jump():
    w = np.array([[0.5, 0.5]])
    assert edge_integral(1.0, w, np.ones((1, 2)), np.zeros((1, 2)))[0] == pytest.approx(1.0)
    assert edge_integral(0.5, w, np.zeros((1, 2)), np.ones((1, 2)))[0] == pytest.approx(0.5**1.5)


def test_boundary_edges_are_rejected(rigid):
    boundary = np.flatnonzero(rigid.mesh.boundary_edges)[:1]
    with pytest.raises(ValueError, match="interior"):
        edge_jump_profiles(rigid, boundary)


def test_obstacle_term_examples():
    w = np.full((1, 4), 0.125)
    c = 0.3
    contact, S = obstacle_integrals(w, 0.5, np.zeros((1, 4)), np.full((1, 4), c), np.zeros((1, 4)), 0.0)
    assert contact[0] == 0
    assert S[0] == pytest.approx(c * np.sqrt(0.5) / 0.5**2)
    contact, S = obstacle_integrals(w, 0.5, np.ones((1, 4)), np.zeros((1, 4)), np.zeros((1, 4)), 1e-3)
    assert contact[0] == 0 and S[0] == 0


def test_no_obstacle_gives_zero_obstacle_terms():
    mesh = build_structured_unit_square(2)
    sol = solve_contact(ObstacleProblem(f=-10.0, g=-1e6), mesh)
    contact, S = obstacle_terms(sol)
    assert contact.max() <= 1e-10 and S.max() <= 1e-10


def test_breakdown_is_nonnegative_and_reconstructs_totals(rigid):
    err = estimate(rigid)
    for arr in (err.eta_K, err.eta_E, err.contact, err.S_K, err.indicators):
        assert np.all(arr >= 0)
    assert err.eta**2 == pytest.approx(np.sum(err.eta_K**2) + np.sum(err.eta_E**2), rel=1e-12)
    assert err.S**2 == pytest.approx(np.sum(err.contact + err.S_K**2), rel=1e-12)
    assert np.sum(err.indicators**2) == pytest.approx(err.eta**2 + err.S**2, rel=1e-12)
    assert np.all(err.eta_E[rigid.mesh.boundary_edges] == 0)


def test_edge_terms_are_shared_by_exactly_two_elements(rigid):
    err = estimate(rigid)
    mesh = rigid.mesh
    halves = 0.5 * np.sum(err.eta_E[mesh.triangle_edges] ** 2)
    assert halves == pytest.approx(np.sum(err.eta_E[mesh.interior_edges] ** 2), rel=1e-12)


def test_largest_indicators_sit_at_the_centre(rigid):
    err = estimate(rigid)
    dist = np.hypot(*(rigid.mesh.centroids - 0.5).T)
    assert dist[np.argmax(err.indicators)] == pytest.approx(dist.min(), abs=1e-12)


def test_estimator_is_positively_homogeneous():
    mesh = build_structured_unit_square(4)
    base = preset_problem("rigid")
    c = 3.0
    scaled = ObstacleProblem(lambda x, y: c * base.f(x, y), lambda x, y: c * base.g(x, y))
    s1, s2 = solve_contact(base, mesh), solve_contact(scaled, mesh)
    assert np.allclose(s2.dofs, c * s1.dofs, rtol=1e-9, atol=1e-9 * np.abs(s2.dofs).max())
    assert np.allclose(s2.contact.reaction, c * s1.contact.reaction, rtol=1e-9, atol=1e-9 * s2.contact.reaction.max())
    e1, e2 = estimate(s1), estimate(s2)
    assert e2.eta == pytest.approx(c * e1.eta, rel=1e-9)
    assert e2.S == pytest.approx(c * e1.S, rel=1e-9)


def test_marking_examples():
    assert mark_elements([1.0, 0.6, 0.4], 0.5).tolist() == [0, 1]
    assert mark_elements([2.0, 2.0, 2.0], 0.5).tolist() == [0, 1, 2]
    assert mark_elements([0.0, 0.0], 0.5).tolist() == [0, 1]
    for theta in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            mark_elements([1.0], theta)
    with pytest.raises(ValueError):
        mark_elements([], 0.5)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0, 1e3, allow_nan=False), min_size=1, max_size=40),
    st.floats(0.01, 0.99),
)
def test_marking_equals_brute_force_filter(values, theta):
    top = max(values)
    expected = [i for i, v in enumerate(values) if v >= theta * top]
    assert mark_elements(values, theta).tolist() == expected
