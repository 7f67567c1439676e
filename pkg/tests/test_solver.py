"""Contact fixed-point iteration, reaction field and solution evaluators."""
import numpy as np
import pytest

import kirchhoff_obstacle.solver as solver_module
from kirchhoff_obstacle.adaptive import adaptive_solve
from kirchhoff_obstacle.assembly import ContactState, assemble_nitsche, solve
from kirchhoff_obstacle.io import grid_points
from kirchhoff_obstacle.mesh import build_structured_unit_square
from kirchhoff_obstacle.problem import ObstacleProblem
from kirchhoff_obstacle.solver import DiscreteSolution, reaction_field, solve_contact
from conftest import preset_problem
from oracles import pgs_contact


@pytest.fixture(scope="module")
def rigid_solution():
    return solve_contact(preset_problem("rigid"), build_structured_unit_square(4))


@pytest.fixture(scope="module")
def elastic_solutions():
    mesh = build_structured_unit_square(4)
    return {eps: solve_contact(preset_problem("elastic", eps=eps), mesh) for eps in (1e-3, 1e-4, 1e-5, 1e-6)}


@pytest.mark.parametrize("g", [None, -1e6])
def test_no_contact_converges_immediately(g):
    sol = solve_contact(ObstacleProblem(f=-10.0, g=g), build_structured_unit_square(3))
    assert sol.converged and sol.iterations <= 2
    assert np.all(reaction_field(sol).values == 0)
    assert sol.increment <= 1e-10


def test_agrees_with_complementarity_oracle():
    problem = preset_problem("elastic", eps=1e-3)
    mesh = build_structured_unit_square(2)
    sol = solve_contact(problem, mesh)
    x, lam, _, _ = pgs_contact(problem, mesh)
    assert sol.converged
    assert sol.energy_norm(x) <= 1e-6 * max(1.0, sol.energy_norm())
    assert np.abs(sol.contact.reaction - lam).max() <= 1e-6 * lam.max()


def test_rigid_agrees_with_complementarity_oracle():
    problem = preset_problem("rigid")
    mesh = build_structured_unit_square(2)
    sol = solve_contact(problem, mesh)
    x, _, _, _ = pgs_contact(problem, mesh)
    assert sol.energy_norm(x) <= 1e-6 * sol.energy_norm()


def test_rigid_contact_sits_at_the_centre(rigid_solution):
    sol = rigid_solution
    assert sol.converged
    field = reaction_field(sol)
    touching = field.points[field.values > 0]
    assert len(touching) > 0
    assert np.all(np.hypot(touching[:, 0] - 0.5, touching[:, 1] - 0.5) < 0.3)
    _, pts = grid_points(100)
    gap = sol.values(pts) - sol.problem.obstacle(pts[:, 0], pts[:, 1])
    assert gap.min() >= -1e-3 * 50.0


def test_reaction_satisfies_its_complementarity_identity(elastic_solutions):
    for eps, sol in elastic_solutions.items():
        problem = sol.problem
        q = sol.disc.quad
        local = sol.space.element_values(sol.dofs)
        u, a_u = q.values(local), q.biharmonic(local)
        x, y = q.points[..., 0], q.points[..., 1]
        f, g = problem.load(x, y), problem.obstacle(x, y)
        beta = problem.alpha * q.h[:, None] ** 4
        lam = sol.contact.reaction
        assert np.all(lam >= 0)
        on = lam > 0
        residual = u - g + eps * lam - beta * (a_u - f)
        # on the contact set the residual is exactly -beta * lam
        assert np.abs(residual[on] + beta[np.nonzero(on)[0], 0] * lam[on]).max() <= 1e-8 * max(1.0, np.abs(g).max())
        assert np.all(lam * residual <= 1e-14)
        # off the contact set the reaction argument is non-positive
        assert np.all(residual[~on] >= -1e-12)


def test_converged_iterate_is_a_fixed_point(elastic_solutions):
    sol = elastic_solutions[1e-5]
    x = solve(assemble_nitsche(sol.problem, sol.disc, sol.contact))
    assert sol.energy_norm(x) <= sol.problem.tol


def test_iteration_cap_is_reported():
    problem = preset_problem("elastic", eps=1e-6)
    problem = ObstacleProblem(problem.f, problem.g, problem.eps, problem.alpha, problem.model, problem.tol, max_iterations=1)
    sol = solve_contact(problem, build_structured_unit_square(4))
    assert not sol.converged and sol.iterations == 2


def test_repeating_contact_pattern_stops_the_iteration(monkeypatch):
    problem = preset_problem("elastic", eps=1e-3)
    mesh = build_structured_unit_square(2)
    original = solver_module.contact_state
    calls = []

    def alternating(problem, disc, dofs):
        state = original(problem, disc, dofs)
        calls.append(1)
        if len(calls) % 2 == 0:
            return ContactState.empty(state.chi.shape)
        return state

    monkeypatch.setattr(solver_module, "contact_state", alternating)
    sol = solve_contact(problem, mesh)
    assert not sol.converged
    assert sol.iterations < problem.max_iterations


def test_penetration_decreases_with_compliance(elastic_solutions):
    pen = []
    for eps in (1e-3, 1e-4, 1e-5, 1e-6):
        sol = elastic_solutions[eps]
        q = sol.disc.quad
        u = q.values(sol.space.element_values(sol.dofs))
        g = sol.problem.obstacle(q.points[..., 0], q.points[..., 1])
        pen.append(np.maximum(g - u, 0).max())
    assert all(a >= b for a, b in zip(pen, pen[1:])), pen


def test_softer_obstacle_has_larger_contact_area(elastic_solutions):
    assert reaction_field(elastic_solutions[1e-3]).area_fraction > reaction_field(elastic_solutions[1e-6]).area_fraction


def test_rigid_penetration_shrinks_under_adaptive_refinement():
    problem = preset_problem("rigid")
    history = adaptive_solve(problem, build_structured_unit_square(4), 3)
    _, pts = grid_points(100)
    g = problem.obstacle(pts[:, 0], pts[:, 1])
    delta = 1e-3 * (g.max() - g.min())
    measures, worst = [], []
    for rec in history.records:
        gap = rec.solution.values(pts) - g
        measures.append(np.mean(gap < -delta))
        worst.append(max(0.0, -gap.min()))
    assert all(a >= b for a, b in zip(measures, measures[1:]))
    assert all(a >= b for a, b in zip(worst, worst[1:])), worst


def test_evaluators_are_consistent(rigid_solution, rng):
    sol = rigid_solution
    q = sol.disc.quad
    t = rng.integers(0, sol.mesh.n_triangles, 10)
    k = rng.integers(0, q.points.shape[1], 10)
    pts = q.points[t, k]
    assert np.allclose(sol.values(pts, t), q.values(sol.space.element_values(sol.dofs))[t, k], atol=1e-12)
    assert np.allclose(sol.reaction_at(pts, t), sol.contact.reaction[t, k], rtol=1e-10, atol=1e-10)
    outside = sol.evaluate(np.array([[1.5, 0.5]]), order=1)
    assert np.all(np.isnan(outside))


def test_from_dofs_wraps_arbitrary_fields(rigid_solution):
    wrapped = DiscreteSolution.from_dofs(rigid_solution.problem, rigid_solution.disc, rigid_solution.dofs)
    assert np.array_equal(wrapped.contact.reaction, rigid_solution.contact.reaction)
    with pytest.raises(ValueError):
        wrapped.energy_norm()
    with pytest.raises(ValueError):
        DiscreteSolution.from_dofs(rigid_solution.problem, rigid_solution.disc, np.zeros(3))


def test_problem_validation():
    for kwargs in ({"eps": -1.0}, {"alpha": 0.0}, {"tol": 0.0}, {"theta": 1.0}, {"max_iterations": 0}):
        with pytest.raises(ValueError):
            ObstacleProblem(f=1.0, **kwargs)
