"""Command-line entry point.

Usage::

    kirchhoff-obstacle solve --config run.cfg [--preset rigid|elastic] [--eps 1e-4]
                             [--mode uniform|adaptive] [--steps 5] [--out results]

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, parse_config
from .experiments import nearest_reference, run_elastic, run_experiment, run_rigid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kirchhoff-obstacle", description="Clamped plate obstacle solver")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="run a uniform or adaptive experiment")
    s.add_argument("--config", help="key = value configuration file (optional)")
    s.add_argument("--preset", choices=["rigid", "elastic", "custom"])
    s.add_argument("--eps", type=float)
    s.add_argument("--mode", choices=["uniform", "adaptive"])
    s.add_argument("--steps", type=int)
    s.add_argument("--out")
    s.add_argument("-v", "--verbose", action="store_true")
    return p


def _report(result) -> None:
    cfg = result.config
    print(f"preset={cfg.preset} eps={cfg.eps:g} mode={cfg.mode} steps={len(result.history)}")
    key = (cfg.preset, cfg.eps, cfg.mode)
    if nearest_reference(key, 0) is not None:
        print("ref columns: published value at the nearest N; N is counted differently, so the comparison is approximate")
    print(f"{'step':>4} {'N':>7} {'eta+S':>12} {'iters':>5} {'conv':>4} {'ref N':>6} {'ref eta+S':>12}")
    for rec in result.history.records:
        ref = nearest_reference(key, rec.N)
        ref_txt = f"{ref[0]:>6} {ref[1]:>12.4e}" if ref else f"{'-':>6} {'-':>12}"
        print(
            f"{rec.step:>4} {rec.N:>7} {rec.errors.total:>12.4e} {rec.solution.iterations:>5} "
            f"{'yes' if rec.solution.converged else 'no':>4} {ref_txt}"
        )
    if result.slope is not None:
        print(f"slope of eta+S against N: {result.slope:.3f}")
    comps = [c for c in result.components if c is not None]
    if comps:
        print("contact components per step: " + " ".join(map(str, comps)))
    print(f"artifacts written to {result.out_dir}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {"preset": args.preset, "eps": args.eps, "mode": args.mode, "steps": args.steps, "out": args.out}
    try:
        cfg = parse_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    runner = {"rigid": run_rigid, "elastic": run_elastic}.get(cfg.preset, run_experiment)
    try:
        result = runner(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _report(result)
    if result.error is not None:
        print(f"solver failure: {result.error}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
