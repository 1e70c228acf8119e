"""Experiment configuration: flat ``key = value`` files with per-experiment defaults.

Blank lines and lines starting with ``#`` are ignored. Every key must be one
of :data:`KEYS`; values are parsed to the type of the key's default.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..errors import ConfigError
from ..solvers import SolverConfig

EXPERIMENTS = ("step", "rb2d", "rb2d-sine", "rb2d-param", "rbNd")


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str = "step"
    seed: int = 0
    n_train: int = 1000
    n_test: int = 10000
    epochs: int = 100
    batch_size: int = 256
    lr: float = 1e-2
    start_frac: float = 0.01
    end_frac: float = 0.0
    K: int = 1
    depth: int = 8
    width: int = 32
    mu: float = 0.1
    nu: float = 10.0
    activation: str = "relu"
    orthogonal: bool = True
    dim: int = 20
    cond_hidden: str = "64,128"
    anchor_min: bool = True
    certify_every: int = 1
    solver_tol: float = 1e-8
    solver_max_iters: int = 50000
    verify_samples: int = 10000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        for name in ("n_train", "n_test", "batch_size", "K", "depth", "width", "dim", "verify_samples", "solver_max_iters"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0 < self.mu < self.nu:
            raise ConfigError(f"need 0 < mu < nu, got mu={self.mu}, nu={self.nu}")

    @property
    def tau(self) -> float:
        return self.nu / self.mu

    @property
    def hidden(self) -> tuple[int, ...]:
        return tuple(int(h) for h in self.cond_hidden.split(",") if h.strip())

    def solver_config(self) -> SolverConfig:
        """Settings for computing the global minimum after training."""
        return SolverConfig(tol=self.solver_tol, max_iters=self.solver_max_iters)

    def as_dict(self) -> dict:
        return asdict(self)


KEYS = tuple(f.name for f in fields(ExperimentSpec))

# desk-scale defaults; see README for the reasoning behind each
DEFAULTS = {
    "step": dict(n_train=1000, n_test=10000, epochs=300, batch_size=50, lr=5e-3, K=1, depth=8, width=32, mu=0.1, nu=10.0, orthogonal=False),
    "rb2d": dict(n_train=5000, n_test=10000, epochs=300, batch_size=256, lr=5e-3, K=2, depth=4, width=128, mu=0.01, nu=16.0),
    "rb2d-sine": dict(n_train=5000, n_test=10000, epochs=300, batch_size=256, lr=5e-3, K=2, depth=4, width=128, mu=0.01, nu=16.0),
    "rb2d-param": dict(n_train=10000, n_test=10000, epochs=60, batch_size=256, lr=5e-3, K=2, depth=4, width=128, mu=0.04, nu=16.0, cond_hidden="64,128"),
    "rbNd": dict(n_train=10000, n_test=50000, epochs=100, batch_size=200, lr=3e-3, K=2, depth=8, width=256, mu=0.2, nu=1.0, dim=20, certify_every=5),
}


def _parse_value(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    return raw


def parse_config(text: str) -> dict:
    """``key = value`` lines to a dict of typed values (unknown keys are errors)."""
    base = ExperimentSpec()
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _parse_value(key, raw, getattr(base, key))
    return out


def make_spec(experiment: str, overrides: dict | None = None) -> ExperimentSpec:
    """Experiment defaults with ``overrides`` applied on top."""
    overrides = dict(overrides or {})
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    if overrides.get("experiment", experiment) != experiment:
        raise ConfigError(f"config names experiment {overrides['experiment']!r} but {experiment!r} was requested")
    unknown = set(overrides) - set(KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return replace(ExperimentSpec(), **{**DEFAULTS[experiment], **overrides, "experiment": experiment})


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())


def dump_config(spec: ExperimentSpec) -> str:
    return "".join(f"{k} = {v}\n" for k, v in spec.as_dict().items())
