"""Inverting a monotone-Lipschitz layer: Davis-Yin splitting and forward steps.

For ``y = F(x)`` the hidden state ``z`` of the inverse solves

    z = s((V - (gamma/mu) S S^T) z + b_z),   b_z = sqrt(2 gamma)/mu S (y - b_y) + b_hat

which is a zero of ``A + B + C`` with ``A(z) = (I - V) z - b_z``,
``B = d f`` (``s = prox_f``) and ``C(z) = (gamma/mu) S S^T z``. Once ``z`` is
known, ``x = (y - b_y - sqrt(gamma/2) S^T z) / mu``.

Residuals are infinity norms of successive iterates; ``tol`` refers to them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from math import sqrt
from typing import Callable, Iterable

import numpy as np

from .errors import ConfigError, NonConvergenceError, NumericalError
from .monlip import LayerWeights, forward
from .numerics import ad

DYS, FSM = "dys", "fsm"
ROOT_MAX_ITERS = 60


# proximal operators ----------------------------------------------------------

def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def _relu_prox(x, alpha):
    return np.maximum(x, 0.0)


def _leaky_prox(x, alpha, slope=0.01):
    # f(z) = (1/slope - 1)/2 * min(z, 0)^2
    k = 1.0 / slope - 1.0
    return np.where(x >= 0.0, x, x / (1.0 + k * alpha))


def _smooth_prox(sigma: Callable, dsigma: Callable) -> Callable:
    """Prox of the convex ``f`` with ``prox_f^1 = sigma``, for any ``alpha > 0``.

    The optimality condition ``z + alpha f'(z) = x`` with ``f'(z) = sigma^-1(z) - z``
    becomes ``h(t) = (1 - alpha) sigma(t) + alpha t - x = 0`` in the
    pre-activation ``t`` (``z = sigma(t)``). Since ``0 <= sigma' <= 1``,
    ``h' >= min(1, alpha) > 0``: the root is unique and bracketed by
    ``t0 -+ |h(t0)| / min(1, alpha)``. Safeguarded Newton on that bracket.
    """

    def prox(x, alpha):
        x = np.asarray(x, dtype=np.float64)
        if alpha == 1.0:
            return sigma(x)
        slope_lb = min(1.0, alpha)
        t = x.copy()
        h = (1.0 - alpha) * sigma(t) + alpha * t - x
        width = np.abs(h) / slope_lb
        lo, hi = t - width, t + width
        done = np.zeros(x.shape, dtype=bool)
        for _ in range(ROOT_MAX_ITERS):
            h = (1.0 - alpha) * sigma(t) + alpha * t - x
            done = np.abs(h) <= 1e-14 * (1.0 + np.abs(x))
            if done.all():
                break
            lo = np.where(h < 0, t, lo)
            hi = np.where(h > 0, t, hi)
            dh = (1.0 - alpha) * dsigma(t) + alpha
            t_newton = t - h / dh
            inside = (t_newton > lo) & (t_newton < hi)
            t = np.where(done, t, np.where(inside, t_newton, 0.5 * (lo + hi)))
            done |= (hi - lo) <= 1e-15 * (1.0 + np.abs(t))
            if done.all():
                break
        if not done.all():
            bad = int(np.flatnonzero(~done.reshape(-1))[0])
            raise NumericalError(f"prox root finder did not converge at coordinate {bad}")
        return sigma(t)

    return prox


@dataclass(frozen=True)
class ProxOp:
    """Elementwise proximal operator of an activation's convex potential."""

    activation: str
    base: Callable

    def __call__(self, x, alpha: float, psi=None) -> np.ndarray:
        """``prox`` of the scaled potential, i.e. ``psi * prox(x / psi)``."""
        if alpha <= 0:
            raise ConfigError(f"prox step must be positive, got {alpha}")
        if psi is None or self.activation in ("relu", "leaky_relu"):
            return self.base(x, alpha)
        return psi * self.base(x / psi, alpha)


PROX_OPS = {
    "relu": ProxOp("relu", _relu_prox),
    "leaky_relu": ProxOp("leaky_relu", _leaky_prox),
    "tanh": ProxOp("tanh", _smooth_prox(np.tanh, lambda t: 1.0 - np.tanh(t) ** 2)),
    "sigmoid": ProxOp("sigmoid", _smooth_prox(_sigmoid, lambda t: _sigmoid(t) * (1 - _sigmoid(t)))),
    "softplus": ProxOp("softplus", _smooth_prox(lambda t: np.logaddexp(0.0, t), _sigmoid)),
}


def prox_op(activation: str) -> ProxOp:
    try:
        return PROX_OPS[activation]
    except KeyError:
        raise ConfigError(f"no proximal operator registered for {activation!r}") from None


def prox(op: ProxOp | str, x, alpha: float, psi=None) -> np.ndarray:
    if isinstance(op, str):
        op = prox_op(op)
    return op(np.asarray(x, dtype=np.float64), alpha, psi)


# solver configuration --------------------------------------------------------

@dataclass(frozen=True)
class SolverConfig:
    """``alpha=None`` picks ``alpha_frac * mu/gamma`` (DYS) or ``mu/nu^2`` (FSM) per layer."""

    kind: str = DYS
    alpha: float | None = None
    tol: float = 1e-8
    max_iters: int = 5000
    record_trace: bool = False
    alpha_frac: float = 0.9
    force: bool = False
    u0: str = "bz"

    def __post_init__(self):
        if self.kind not in (DYS, FSM):
            raise ConfigError(f"solver kind must be 'dys' or 'fsm', got {self.kind!r}")
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.alpha_frac:
            raise ConfigError("alpha_frac must be positive")
        if self.tol <= 0 or self.max_iters < 1:
            raise ConfigError("tol must be positive and max_iters at least 1")
        if self.u0 not in ("bz", "zero"):
            raise ConfigError(f"u0 must be 'bz' or 'zero', got {self.u0!r}")

    def alpha_for(self, mu: float, nu: float) -> float:
        gamma = nu - mu
        if self.kind == FSM:
            alpha = mu / nu**2 if self.alpha is None else self.alpha
            if not self.force and not alpha < 2 * mu / nu**2:
                raise ConfigError(f"FSM alpha={alpha} outside (0, 2 mu/nu^2) = (0, {2 * mu / nu**2:.6g})")
            return alpha
        bound = mu / gamma
        alpha = self.alpha_frac * bound if self.alpha is None else self.alpha
        if not self.force and not (0 < alpha < bound):
            raise ConfigError(f"DYS alpha={alpha} outside (0, mu/gamma) = (0, {bound:.6g})")
        return alpha

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass
class SolveResult:
    x: np.ndarray
    iterations: int
    residual: float
    alpha: float
    kind: str
    z_hat: np.ndarray | None = None
    trace: list[tuple[int, float]] = field(default_factory=list)


def _numpy_weights(w: LayerWeights):
    S = [np.asarray(ad.value_of(s)) for s in w.S]
    V = [None] + [np.asarray(ad.value_of(v)) for v in w.V[1:]]
    psi = w.psi()
    return S, V, psi


def _post_check(w: LayerWeights, x, y, b_hat, b_y) -> float:
    return float(np.max(np.abs(forward(w, x, b_hat, b_y) - y))) if np.size(y) else 0.0


def dys_solve(w: LayerWeights, y, cfg: SolverConfig = SolverConfig(), b_hat=None, b_y=None, u_init=None) -> SolveResult:
    """Davis-Yin iteration for ``x = F^-1(y)``.

    ``y`` is a vector or a batch of rows. Converged when the resolvent output
    moves by at most ``tol`` and ``|F(x) - y|_inf <= 10 tol``. ``u_init``
    overrides the starting point chosen by ``cfg.u0``.
    """
    if cfg.kind != DYS:
        cfg = cfg.with_(kind=DYS)
    spec = w.spec
    mu, gamma = spec.mu, spec.gamma
    alpha = cfg.alpha_for(mu, spec.nu)
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != spec.n:
        raise ConfigError(f"y has dimension {y.shape[-1]}, layer expects {spec.n}")
    b_hat = np.asarray(ad.value_of(w.b_hat if b_hat is None else b_hat))
    b_y = np.asarray(ad.value_of(w.b_y if b_y is None else b_y))
    S_blocks, V_blocks, psi = _numpy_weights(w)
    S = np.vstack(S_blocks)
    Y = np.atleast_2d(y)
    Yc = Y - b_y

    def to_x(z):
        x = (Yc - sqrt(gamma / 2) * z @ S) / mu
        return x if y.ndim == 2 else x[0]

    trace: list[tuple[int, float]] = []
    if not np.any(S):
        # no coupling: x does not depend on z
        x = to_x(np.zeros((Y.shape[0], spec.m)))
        if cfg.record_trace:
            trace.append((1, 0.0))
        return SolveResult(x, 1, 0.0, alpha, DYS, np.zeros((Y.shape[0], spec.m)), trace)

    bz = (sqrt(2 * gamma) / mu) * Yc @ S.T + b_hat
    c_scale = gamma / mu
    op = prox_op(spec.activation)
    offsets = np.concatenate([[0], np.cumsum(spec.widths)])
    blocks = [slice(offsets[k], offsets[k + 1]) for k in range(spec.depth)]

    if u_init is not None:
        u = np.broadcast_to(np.asarray(u_init, dtype=np.float64), bz.shape).copy()
    else:
        u = bz.copy() if cfg.u0 == "bz" else np.zeros_like(bz)
    z_prev = None
    residual = np.inf
    inv1a = 1.0 / (1.0 + alpha)
    for it in range(1, cfg.max_iters + 1):
        z_half = op(u, alpha, psi)
        u_half = 2.0 * z_half - u
        v = u_half + alpha * (bz - c_scale * (z_half @ S) @ S.T)
        z = np.empty_like(v)
        for k, sl in enumerate(blocks):
            rhs = v[:, sl]
            if k:
                rhs = rhs + alpha * z[:, blocks[k - 1]] @ V_blocks[k].T
            z[:, sl] = rhs * inv1a
        u = u + z - z_half
        if not np.all(np.isfinite(u)):
            raise NumericalError(f"DYS iterate became non-finite at iteration {it}")
        residual = float(np.max(np.abs(z - z_prev))) if z_prev is not None else np.inf
        z_prev = z
        if cfg.record_trace:
            trace.append((it, residual))
        if residual <= cfg.tol:
            x = to_x(z_half)
            if _post_check(w, x, y, b_hat, b_y) <= 10 * cfg.tol:
                return SolveResult(x, it, residual, alpha, DYS, z_half if y.ndim == 2 else z_half[0], trace)
    raise NonConvergenceError(
        f"DYS did not converge in {cfg.max_iters} iterations (alpha={alpha:.4g}, residual={residual:.3e})",
        residual,
        trace,
    )


def fsm_solve(w: LayerWeights, y, cfg: SolverConfig = SolverConfig(kind=FSM), x0=None, b_hat=None, b_y=None) -> SolveResult:
    """Forward-step iteration ``x <- x - alpha (F(x) - y)``, started from ``y``."""
    if cfg.kind != FSM:
        cfg = cfg.with_(kind=FSM)
    spec = w.spec
    alpha = cfg.alpha_for(spec.mu, spec.nu)
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != spec.n:
        raise ConfigError(f"y has dimension {y.shape[-1]}, layer expects {spec.n}")
    x = y.copy() if x0 is None else np.array(x0, dtype=np.float64)
    trace: list[tuple[int, float]] = []
    residual = np.inf
    for it in range(1, cfg.max_iters + 1):
        r = forward(w, x, b_hat, b_y) - y
        step = alpha * r
        x = x - step
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"FSM iterate became non-finite at iteration {it}")
        residual = float(np.max(np.abs(step)))
        if cfg.record_trace:
            trace.append((it, residual))
        if residual <= cfg.tol:
            if _post_check(w, x, y, b_hat, b_y) <= 10 * cfg.tol:
                return SolveResult(x, it, residual, alpha, FSM, None, trace)
    raise NonConvergenceError(
        f"FSM did not converge in {cfg.max_iters} iterations (alpha={alpha:.4g}, residual={residual:.3e})",
        residual,
        trace,
    )


def solve(w: LayerWeights, y, cfg: SolverConfig = SolverConfig(), **kw) -> SolveResult:
    return dys_solve(w, y, cfg, **kw) if cfg.kind == DYS else fsm_solve(w, y, cfg, **kw)


def dys_invert(w: LayerWeights, y, cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    return dys_solve(w, y, cfg).x


def fsm_invert(w: LayerWeights, y, cfg: SolverConfig = SolverConfig(kind=FSM)) -> np.ndarray:
    return fsm_solve(w, y, cfg).x


def solve_trace(w: LayerWeights, y, cfg: SolverConfig) -> list[tuple[int, float]]:
    """Residual history ``[(iteration, residual), ...]`` of one solve."""
    return solve(w, y, cfg.with_(record_trace=True)).trace


TRACE_HEADER = ("solver", "alpha", "iter", "residual")


def write_trace_csv(path_or_file, rows: Iterable[tuple[str, float, int, float]]) -> None:
    """Write ``(solver, alpha, iter, residual)`` rows with a header line."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for solver, alpha, it, res in rows:
            writer.writerow([solver, repr(float(alpha)), int(it), repr(float(res))])
    finally:
        if own:
            fh.close()
