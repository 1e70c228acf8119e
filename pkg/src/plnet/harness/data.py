"""Synthetic regression datasets: a step function and Rosenbrock variants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

ROSEN_BOX = np.array([[-2.0, 2.0], [-1.0, 3.0]])
PARAM_BOX = np.array([[-1.0, 1.0], [-1.0, 1.0]])


@dataclass
class Dataset:
    """``inputs`` (N, n + cond_dim) and ``targets`` (N, k).

    The last ``cond_dim`` input columns are a condition vector, not part of
    the point ``x``. ``box`` bounds the ``x`` columns, ``cond_box`` the rest.
    """

    name: str
    inputs: np.ndarray
    targets: np.ndarray
    box: np.ndarray
    seed: int
    cond_dim: int = 0
    cond_box: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def n(self) -> int:
        return self.inputs.shape[1] - self.cond_dim

    @property
    def x(self) -> np.ndarray:
        return self.inputs[:, : self.n]

    @property
    def p(self) -> np.ndarray | None:
        return self.inputs[:, self.n :] if self.cond_dim else None


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream])


def _check_count(n_samples: int):
    if n_samples < 1:
        raise ConfigError(f"n_samples must be positive, got {n_samples}")


def step_target(x):
    return np.where(np.asarray(x) > 0, 2.0, -2.0)


def gen_step(n_samples: int, seed: int = 0, stream: int = 0) -> Dataset:
    """``x ~ U[-2, 2]``, ``y = 2 sign(x)``."""
    _check_count(n_samples)
    x = _rng(seed, stream).uniform(-2.0, 2.0, (n_samples, 1))
    return Dataset("step", x, step_target(x), np.array([[-2.0, 2.0]]), seed)


def rosenbrock(x, y, a=1.0, b=1.0):
    """Rosenbrock function with the 1/200 scaling on the first term."""
    return (x - a) ** 2 / 200.0 + 0.5 * (y - b * x**2) ** 2


def sine_term(x, y):
    return 0.25 * (np.sin(8 * (x - 1) - np.pi / 2) + np.sin(8 * (y - 1) - np.pi / 2) + 2)


def rosenbrock_nd(X):
    """Mean of ``rosenbrock(x_i, x_{i+1})`` over consecutive coordinate pairs."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] < 2:
        raise ConfigError("the N-dimensional Rosenbrock function needs N >= 2")
    return np.mean(rosenbrock(X[..., :-1], X[..., 1:]), axis=-1)


ROSEN_VARIANTS = ("plain", "plus_sine", "parametric")


def gen_rosenbrock2d(variant: str, n_samples: int, seed: int = 0, stream: int = 0) -> Dataset:
    _check_count(n_samples)
    if variant not in ROSEN_VARIANTS:
        raise ConfigError(f"unknown Rosenbrock variant {variant!r}; choose from {ROSEN_VARIANTS}")
    rng = _rng(seed, stream)
    xy = rng.uniform(ROSEN_BOX[:, 0], ROSEN_BOX[:, 1], (n_samples, 2))
    x, y = xy[:, 0], xy[:, 1]
    if variant == "parametric":
        ab = rng.uniform(PARAM_BOX[:, 0], PARAM_BOX[:, 1], (n_samples, 2))
        t = rosenbrock(x, y, ab[:, 0], ab[:, 1])
        return Dataset("rb2d-param", np.hstack([xy, ab]), t[:, None], ROSEN_BOX.copy(), seed, 2, PARAM_BOX.copy())
    t = rosenbrock(x, y)
    if variant == "plus_sine":
        t = t + sine_term(x, y)
    name = "rb2d" if variant == "plain" else "rb2d-sine"
    return Dataset(name, xy, t[:, None], ROSEN_BOX.copy(), seed)


def gen_rosenbrock_nd(N: int, n_samples: int, seed: int = 0, stream: int = 0) -> Dataset:
    """Uniform samples on ``[-2, 2]^N`` labelled with :func:`rosenbrock_nd`."""
    if N < 2:
        raise ConfigError(f"N must be at least 2, got {N}")
    _check_count(n_samples)
    X = _rng(seed, stream).uniform(-2.0, 2.0, (n_samples, N))
    return Dataset("rbNd", X, rosenbrock_nd(X)[:, None], np.tile([-2.0, 2.0], (N, 1)), seed)
