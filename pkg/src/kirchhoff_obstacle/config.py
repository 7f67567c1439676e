"""Experiment configuration files.

A configuration is a list of ``key = value`` lines; ``#`` starts a comment.
Unknown keys, repeated keys and out-of-range values are rejected with the
offending line number.  Presets fill in every key that is not given:

``rigid``
    ``g = -100*((x-0.5)^2+(y-0.5)^2)`` and ``eps = 0`` (required).
``elastic``
    ``g = rect(0.3, 0.7, 0.3, 0.7, 0, -1)`` and ``eps = 1e-3`` by default.
``custom``
    no obstacle unless ``g`` is given.

All presets share ``f = -10``, ``E = 1``, ``nu = 0``, ``d = 1``,
``alpha = 1e-5``, ``tol = 1e-10`` and ``theta = 0.5``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .expressions import Expression, ExpressionError
from .mesh import Mesh, build_structured_unit_square
from .plate import PlateModel
from .problem import ObstacleProblem

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PRESETS",
    "parse_config",
    "parse_config_text",
    "serialise_config",
]

RIGID_OBSTACLE = "-100*((x-0.5)^2+(y-0.5)^2)"
ELASTIC_OBSTACLE = "rect(0.3, 0.7, 0.3, 0.7, 0, -1)"
PRESETS = ("rigid", "elastic", "custom")
MODES = ("uniform", "adaptive")
DIAGONALS = ("crossed", "anti", "main")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = "custom"
    n: int = 4
    diagonals: str = "crossed"
    mode: str = "adaptive"
    steps: int = 5
    eps: float = 0.0
    alpha: float = 1e-5
    tol: float = 1e-10
    theta: float = 0.5
    max_iterations: int = 50
    E: float = 1.0
    nu: float = 0.0
    d: float = 1.0
    f: str = "-10"
    g: str = "none"
    out: str = "results"
    seed: int = 0
    raster: int = 256

    def problem(self) -> ObstacleProblem:
        g = None if self.g == "none" else Expression(self.g)
        return ObstacleProblem(
            f=Expression(self.f),
            g=g,
            eps=self.eps,
            alpha=self.alpha,
            model=PlateModel(self.E, self.nu, self.d),
            tol=self.tol,
            max_iterations=self.max_iterations,
            theta=self.theta,
        )

    def initial_mesh(self) -> Mesh:
        return build_structured_unit_square(self.n, self.diagonals)


_KEYS = {f.name: f.type for f in fields(ExperimentConfig)}


def _defaults(preset: str) -> dict:
    base = {f.name: f.default for f in fields(ExperimentConfig)}
    base["preset"] = preset
    if preset == "rigid":
        base["g"] = RIGID_OBSTACLE
    elif preset == "elastic":
        base["g"] = ELASTIC_OBSTACLE
        base["eps"] = 1e-3
    return base


def _where(line) -> str:
    return "command line" if line is None else f"line {line}"


def _convert(key, text, line):
    kind = _KEYS[key]
    try:
        if kind == "int":
            v = float(text)
            if v != int(v):
                raise ValueError
            return int(v)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"{_where(line)}: {key} expects a number, got {text!r}") from None
    return text.strip()


def _check(cfg: ExperimentConfig, lines: dict) -> None:
    def fail(key, msg):
        raise ConfigError(f"{_where(lines.get(key))}: {key} {msg}")

    if cfg.preset not in PRESETS:
        fail("preset", f"must be one of {', '.join(PRESETS)}")
    if cfg.mode not in MODES:
        fail("mode", f"must be one of {', '.join(MODES)}")
    if cfg.diagonals not in DIAGONALS:
        fail("diagonals", f"must be one of {', '.join(DIAGONALS)}")
    if cfg.n < 1:
        fail("n", "must be at least 1")
    if cfg.steps < 1:
        fail("steps", "must be at least 1")
    if cfg.max_iterations < 1:
        fail("max_iterations", "must be at least 1")
    if cfg.raster < 2:
        fail("raster", "must be at least 2")
    if not 0 < cfg.theta < 1:
        fail("theta", f"must lie in (0, 1), got {cfg.theta}")
    if not cfg.eps >= 0:
        fail("eps", f"must be non-negative, got {cfg.eps}")
    if not cfg.alpha > 0:
        fail("alpha", f"must be positive, got {cfg.alpha}")
    if not cfg.tol > 0:
        fail("tol", f"must be positive, got {cfg.tol}")
    if not cfg.E > 0:
        fail("E", f"must be positive, got {cfg.E}")
    if not 0 <= cfg.nu < 0.5:
        fail("nu", f"must lie in [0, 0.5), got {cfg.nu}")
    if not cfg.d > 0:
        fail("d", f"must be positive, got {cfg.d}")
    if cfg.preset == "rigid" and cfg.eps != 0:
        fail("eps", "must be 0 for the rigid preset")
    if cfg.preset == "elastic" and cfg.eps <= 0:
        fail("eps", "must be positive for the elastic preset")
    if cfg.preset != "custom" and cfg.g == "none":
        fail("g", f"cannot be 'none' for the {cfg.preset} preset")
    for key in ("f", "g"):
        value = getattr(cfg, key)
        if key == "g" and value == "none":
            continue
        try:
            Expression(value)
        except ExpressionError as exc:
            fail(key, f"is not a valid expression: {exc}")


def parse_config_text(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse configuration text; ``overrides`` (key -> value) win over the file."""
    raw: dict[str, tuple[str, int | None]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: {key} given twice (first on line {raw[key][1]})")
        if not value:
            raise ConfigError(f"line {lineno}: {key} has no value")
        raw[key] = (value, lineno)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _KEYS:
            raise ConfigError(f"command line: unknown key {key!r}")
        raw[key] = (str(value), None)

    preset = raw.get("preset", ("custom", None))[0]
    if preset not in PRESETS:
        raise ConfigError(f"{_where(raw['preset'][1])}: preset must be one of {', '.join(PRESETS)}")
    values = _defaults(preset)
    lines = {}
    for key, (text_value, lineno) in raw.items():
        values[key] = _convert(key, text_value, lineno)
        lines[key] = lineno
    cfg = ExperimentConfig(**values)
    _check(cfg, lines)
    return cfg


def parse_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read and validate a configuration file (``None`` means an empty file)."""
    text = "" if path is None else Path(path).read_text()
    return parse_config_text(text, overrides)


def serialise_config(cfg: ExperimentConfig) -> str:
    """Every key in declaration order; parsing the result gives ``cfg`` back."""
    out = []
    for f in fields(ExperimentConfig):
        v = getattr(cfg, f.name)
        out.append(f"{f.name} = {repr(v) if isinstance(v, float) else v}")
    return "\n".join(out) + "\n"


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    new = replace(cfg, **changes)
    _check(new, {})
    return new
