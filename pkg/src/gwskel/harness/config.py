"""Experiment configuration: one flat record shared by every driver.

Config files are flat ``key = value`` text.  Values are coerced by the
field's declared type; grids are comma-separated.  Unknown keys and type
mismatches raise ConfigError rather than being silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from fractions import Fraction

from ..errors import ConfigError
from ..treegen import LAWS

EXPERIMENTS = (
    "survival",
    "pair-mrca",
    "lifetime",
    "skeleton-density",
    "branch-boundary",
    "shapes",
    "enumerate-lattice",
    "gst-check",
)

# keys whose change cannot alter the record content (excluded from hashing)
NON_PHYSICAL_KEYS = ("threads", "out", "format", "plot")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = ""
    law: str = "geometric-half"
    d: int = 1
    L: int = 1
    n_grid: tuple = (50, 200)
    s: float = 1.0
    k_max: int = 64
    k_grid: tuple = (4, 16, 64)
    K: int = 3
    delta_grid: tuple = (0.05, 0.2)
    epsilon_grid: tuple = (0.1, 0.3, 1.0)
    m_grid: tuple = (10, 50, 100, 200)
    moment_m_grid: tuple = (1, 5, 20)
    t_grid: tuple = (1.5, 2.0, 3.0)
    window: tuple = (0.2, 0.6)
    depth: int = 3
    window_n_grid: tuple = (50, 200)
    u1: float = 1.0
    u2: float = 1.0
    pairs_per_tree: int = 128
    sample_vertices: int = 4096
    budget: int = 200_000
    gen_cap_factor: int = 500
    attempt_factor: int = 8
    batch_size: int = 8192
    z: Fraction = Fraction(1)
    max_edges: int = 2
    replicas: int = 100_000
    seed: int = 20260816
    out: str = "runs"
    threads: int = 1
    format: str = "csv"
    plot: bool = False

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Fraction):
                v = str(v)
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    def hash_dict(self):
        """Config echo without the keys that cannot affect results."""
        d = self.to_dict()
        for k in NON_PHYSICAL_KEYS:
            d.pop(k)
        return d


_INT_KEYS = {
    "d", "L", "k_max", "K", "depth", "pairs_per_tree", "sample_vertices",
    "budget", "gen_cap_factor", "attempt_factor", "batch_size", "max_edges",
    "replicas", "seed", "threads",
}
_FLOAT_KEYS = {"s", "u1", "u2"}
_INT_GRID_KEYS = {"n_grid", "k_grid", "m_grid", "moment_m_grid", "window_n_grid"}
_FLOAT_GRID_KEYS = {"delta_grid", "epsilon_grid", "t_grid", "window"}
_STR_KEYS = {"experiment", "law", "out", "format"}
_BOOL_KEYS = {"plot"}
_FRACTION_KEYS = {"z"}


def _coerce(key, raw):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _STR_KEYS:
            return raw
        if key in _BOOL_KEYS:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if key in _FRACTION_KEYS:
            return Fraction(raw)
        if key in _INT_GRID_KEYS:
            parts = [p for p in raw.split(",") if p.strip()]
            return tuple(int(p) for p in parts)
        if key in _FLOAT_GRID_KEYS:
            parts = [p for p in raw.split(",") if p.strip()]
            return tuple(float(p) for p in parts)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    raise ConfigError(f"unknown config key: {key}")


def parse_config_text(text):
    """Flat key = value lines; # starts a comment; blank lines ignored."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        values[key] = _coerce(key, raw)
    return values


def load_config(path=None, overrides=None):
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                values = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if overrides:
        values.update(overrides)
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _positive_grid(cfg, name, kind=float):
    grid = getattr(cfg, name)
    if not grid:
        raise ConfigError(f"{name} must be non-empty")
    for v in grid:
        if not isinstance(v, kind) or v <= 0:
            raise ConfigError(f"{name} entries must be positive {kind.__name__}s")


def validate_config(cfg):
    """Check the fields the configured experiment will actually consume."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    if cfg.law not in LAWS:
        raise ConfigError(f"unknown offspring law {cfg.law!r}")
    if cfg.replicas < 1:
        raise ConfigError("replicas must be at least 1")
    if cfg.seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    if cfg.threads < 1:
        raise ConfigError("threads must be at least 1")
    if cfg.batch_size < 1:
        raise ConfigError("batch_size must be at least 1")
    if cfg.format not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if cfg.d < 1 or cfg.L < 1:
        raise ConfigError("d and L must be at least 1")
    exp = cfg.experiment
    if exp == "survival":
        if not cfg.m_grid or any(m < 0 for m in cfg.m_grid):
            raise ConfigError("m_grid must be non-empty and non-negative")
        if not cfg.moment_m_grid or any(m < 1 for m in cfg.moment_m_grid):
            raise ConfigError("moment_m_grid must be non-empty and positive")
    elif exp == "pair-mrca":
        if cfg.depth < 1:
            raise ConfigError("depth must be at least 1")
        a, b = _window(cfg)
        if not 0 <= a <= b:
            raise ConfigError("window must satisfy 0 <= a <= b")
        for n in cfg.window_n_grid:
            if n < 1:
                raise ConfigError("window_n_grid entries must be positive")
    elif exp == "lifetime":
        _positive_grid(cfg, "n_grid", int)
        if not cfg.t_grid:
            raise ConfigError("t_grid must be non-empty")
        if cfg.s != 1.0:
            raise ConfigError("the lifetime oracle needs s = 1")
        if cfg.gen_cap_factor < 2:
            raise ConfigError("gen_cap_factor must be at least 2")
    elif exp == "skeleton-density":
        _positive_grid(cfg, "n_grid", int)
        _positive_grid(cfg, "k_grid", int)
        if tuple(sorted(cfg.k_grid)) != cfg.k_grid:
            raise ConfigError("k_grid must be sorted ascending")
        if cfg.k_grid[-1] > cfg.k_max:
            raise ConfigError("k_grid exceeds k_max")
        _positive_grid(cfg, "epsilon_grid")
        if cfg.budget < 1 or cfg.sample_vertices < 1:
            raise ConfigError("budget and sample_vertices must be positive")
    elif exp == "branch-boundary":
        _positive_grid(cfg, "n_grid", int)
        _positive_grid(cfg, "delta_grid")
        _positive_grid(cfg, "epsilon_grid")
        if cfg.u1 <= 0 or cfg.u2 <= 0:
            raise ConfigError("u1 and u2 must be positive")
        if cfg.u1 != cfg.u2 or cfg.u1 != 1.0:
            raise ConfigError("only u1 = u2 = 1 is implemented")
        if cfg.pairs_per_tree < 1:
            raise ConfigError("pairs_per_tree must be at least 1")
    elif exp == "shapes":
        if cfg.K not in (2, 3, 4):
            raise ConfigError("K must be one of 2, 3, 4")
        _positive_grid(cfg, "n_grid", int)
        if cfg.budget < 1:
            raise ConfigError("budget must be positive")
        if cfg.attempt_factor < 1:
            raise ConfigError("attempt_factor must be at least 1")
    elif exp == "enumerate-lattice":
        if cfg.max_edges < 0:
            raise ConfigError("max_edges must be non-negative")
        if cfg.z <= 0:
            raise ConfigError("z must be positive")
    elif exp == "gst-check":
        _positive_grid(cfg, "n_grid", int)
        if cfg.K < 2:
            raise ConfigError("gst-check needs K >= 2")
    return cfg


def _window(cfg):
    if len(cfg.window) != 2:
        raise ConfigError("window must be two numbers a, b")
    return cfg.window


def with_experiment(cfg, experiment):
    return replace(cfg, experiment=experiment)


# Per-experiment baseline overrides, applied below dataclass defaults and
# above config files and CLI flags.  They size each experiment so that the
# bare command runs in minutes; replicas means attempts for the fixed-count
# experiments and an accepted-tree target for the rejection-sampled ones.
EXPERIMENT_DEFAULTS = {
    "survival": {"replicas": 1_000_000},
    "pair-mrca": {"replicas": 200_000, "window_n_grid": ()},
    "lifetime": {"replicas": 20_000, "n_grid": (200,), "batch_size": 1_048_576},
    "skeleton-density": {"replicas": 1_000, "n_grid": (100,)},
    "branch-boundary": {"replicas": 500_000},
    "shapes": {"replicas": 2_000, "n_grid": (50, 100, 200), "gen_cap_factor": 20,
               "law": "poisson-one"},
    "enumerate-lattice": {"replicas": 100_000},
    "gst-check": {"replicas": 200, "n_grid": (1, 2, 7, 100), "K": 3},
}


def build_config(experiment, path=None, overrides=None):
    """Config for one experiment: defaults, then its baseline, then the
    config file, then explicit overrides; validated at the end."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    values = dict(EXPERIMENT_DEFAULTS.get(experiment, {}))
    values["experiment"] = experiment
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                file_values = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        file_values.pop("experiment", None)
        values.update(file_values)
    if overrides:
        values.update(overrides)
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return validate_config(cfg)
