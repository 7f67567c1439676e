"""Wall-clock timings of the main pipeline stages on uniformly refined meshes.

Usage::

    python benchmarks/bench_pipeline.py [--levels 3] [--repeat 3]

Each stage is timed separately with fresh caches: building the Argyris
space and clamped constraints, assembling the Nitsche system, the sparse
solve, the full contact iteration, the estimator and one RGB refinement.
"""
import argparse
import time

import numpy as np

from kirchhoff_obstacle.assembly import Discretisation, assemble_nitsche, solve
from kirchhoff_obstacle.config import parse_config_text
from kirchhoff_obstacle.estimator import estimate, mark_elements
from kirchhoff_obstacle.mesh import build_structured_unit_square, rgb_refine, uniform_refine
from kirchhoff_obstacle.solver import solve_contact


def best_of(repeat, fn):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    problem = parse_config_text("", {"preset": "elastic", "eps": 1e-3}).problem()
    mesh = build_structured_unit_square(4)
    header = f"{'triangles':>9} {'N':>6} {'space':>8} {'assemble':>8} {'solve':>8} {'contact':>8} {'estimate':>8} {'refine':>8}"
    print(header)
    for _ in range(args.levels + 1):
        t_space, disc = best_of(args.repeat, lambda: Discretisation(mesh, problem.model))
        t_asm, system = best_of(args.repeat, lambda: assemble_nitsche(problem, disc, None))
        t_solve, _ = best_of(args.repeat, lambda: solve(system))
        t_contact, sol = best_of(args.repeat, lambda: solve_contact(problem, mesh, Discretisation(mesh, problem.model)))
        t_est, errors = best_of(args.repeat, lambda: estimate(sol))
        marked = mark_elements(errors.indicators, problem.theta)
        t_ref, _ = best_of(args.repeat, lambda: rgb_refine(mesh, marked))
        print(
            f"{mesh.n_triangles:>9} {disc.n_free:>6} "
            + " ".join(f"{t:>8.3f}" for t in (t_space, t_asm, t_solve, t_contact, t_est, t_ref))
        )
        mesh = uniform_refine(mesh)
    print(f"times in seconds, best of {args.repeat}; numpy {np.__version__}")


if __name__ == "__main__":
    main()
