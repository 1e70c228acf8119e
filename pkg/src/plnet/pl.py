"""Scalar networks ``f(x) = 0.5 |G(x)|^2 + c`` with a bi-Lipschitz ``G``.

Such an ``f`` satisfies the Polyak-Lojasiewicz inequality with constant
``m = mu^2`` and has the unique minimizer ``G^-1(0)``. This module evaluates
``f``, computes its minimizer, and runs sampling verifiers for the inequality
and for the bi-Lipschitz bounds of ``G``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .cayley import OrthogonalSpec
from .bilip import (
    BiLipModel,
    ConditionedBiLipModel,
    conditioned_forward,
    conditioned_inverse_info,
    g_forward,
    g_inverse_info,
)
from .errors import ConfigError, DimensionError
from .monlip import MonLipSpec
from .numerics import ad
from .numerics.tape import Tape
from .solvers import SolverConfig

PL_SLACK = 1e-7
BILIP_SLACK = 1e-9


class PLNet:
    """``f(x) = 0.5 |G(x)|^2 + c``; ``G`` may be bias-conditioned on ``p``.

    ``domain`` is an ``(n, 2)`` array of per-coordinate bounds used as the
    default sampling box of the verifiers (``cond_domain`` likewise for ``p``).
    """

    def __init__(self, g, c: float = 0.0, domain=None, cond_domain=None):
        self.g = g
        self.c = float(c)
        self.domain = None if domain is None else np.asarray(domain, dtype=np.float64)
        self.cond_domain = None if cond_domain is None else np.asarray(cond_domain, dtype=np.float64)

    @property
    def conditioned(self) -> bool:
        return isinstance(self.g, ConditionedBiLipModel)

    @property
    def n(self) -> int:
        return self.g.n

    @property
    def mu(self) -> float:
        return self.g.mu

    @property
    def m(self) -> float:
        return self.g.mu**2

    @property
    def params(self) -> dict:
        return {"g": self.g.params, "c": np.asarray(self.c)}

    def with_params(self, params) -> "PLNet":
        return PLNet(self.g.with_params(params["g"]), float(params["c"]), self.domain, self.cond_domain)

    def apply(self, params, x, p=None):
        """Differentiable batch evaluation, one value per row of ``x``."""
        G = self.g.apply(params["g"], x, p) if self.conditioned else self.g.apply(params["g"], x)
        return ad.add(0.5 * ad.row_sums(ad.square(G)), params["c"])

    def G(self, x, p=None) -> np.ndarray:
        if self.conditioned:
            if p is None:
                raise DimensionError("conditioned network needs a condition p")
            return conditioned_forward(self.g, x, p)
        return g_forward(self.g, x)


def f_eval(net: PLNet, x, p=None):
    """``f`` at a vector (returns a float) or at every row of a batch."""
    G = np.asarray(net.G(x, p))
    val = 0.5 * np.sum(G * G, axis=-1) + net.c
    return float(val) if G.ndim == 1 else val


def grad_f(net: PLNet, x, p=None) -> np.ndarray:
    """``grad f`` by reverse-mode differentiation, per row for a batch."""
    x = np.asarray(x, dtype=np.float64)
    X = np.atleast_2d(x)
    params = net.params
    tape = Tape()
    xv = tape.leaf(X)
    if net.conditioned:
        if p is None:
            raise DimensionError("conditioned network needs a condition p")
        P = np.broadcast_to(np.atleast_2d(np.asarray(p, dtype=np.float64)), (X.shape[0], net.g.cond_dim))
        G = net.g.base.apply(None, xv, net.g.biases(P))
    else:
        G = net.g.apply(None, xv)
    # rows are independent, so the gradient of the sum is the per-row gradient
    root = ad.total(0.5 * ad.square(G))
    (gx,) = tape.backward(root)
    return gx if x.ndim == 2 else gx[0]


def global_min(net: PLNet, cfg: SolverConfig = SolverConfig(), p=None, rng=None) -> tuple[np.ndarray, float]:
    """``(x*, f*)`` with ``x* = G^-1(0)``; ``f*`` is ``c`` up to solver error."""
    x_star = global_min_info(net, cfg, p, rng).x
    return x_star, f_eval(net, x_star, p)


def global_min_info(net: PLNet, cfg: SolverConfig = SolverConfig(), p=None, rng=None):
    if net.conditioned:
        if p is None:
            raise DimensionError("conditioned network needs a condition p")
        P = np.asarray(p, dtype=np.float64)
        zero = np.zeros(net.n) if P.ndim == 1 else np.zeros((P.shape[0], net.n))
        return conditioned_inverse_info(net.g, zero, P, cfg, rng)
    return g_inverse_info(net.g, np.zeros(net.n), cfg, rng)


def anchor_minimum(net: PLNet, x) -> PLNet:
    """Copy of ``net`` whose ``G`` vanishes at ``x``, so ``x`` becomes the global minimizer.

    Only the offset of the last orthogonal layer moves, which leaves every
    weight and certificate unchanged. Unconditioned networks only.
    """
    if net.conditioned:
        raise ConfigError("anchoring needs an unconditioned network")
    params = [dict(p) for p in net.g.params]
    params[-1]["q"] = np.asarray(params[-1]["q"]) - g_forward(net.g, np.asarray(x, dtype=np.float64))
    return PLNet(net.g.with_params(params), net.c, net.domain, net.cond_domain)


def inflate_box(box, frac: float = 0.25) -> np.ndarray:
    """Grow each ``(lo, hi)`` interval by ``frac`` of its width, split evenly on both sides."""
    box = np.asarray(box, dtype=np.float64)
    pad = 0.5 * frac * (box[:, 1] - box[:, 0])
    return np.stack([box[:, 0] - pad, box[:, 1] + pad], axis=1)


def _domain(obj, n: int, domain) -> np.ndarray:
    if domain is None:
        domain = getattr(obj, "domain", None)
    if domain is None:
        domain = np.tile([-1.0, 1.0], (n, 1))
    domain = np.asarray(domain, dtype=np.float64)
    if domain.shape != (n, 2):
        raise DimensionError(f"domain must have shape ({n}, 2), got {domain.shape}")
    return domain


def _uniform(rng: np.random.Generator, box: np.ndarray, count: int) -> np.ndarray:
    return rng.uniform(box[:, 0], box[:, 1], (count, box.shape[0]))


def pl_margins(fvals, grads, f_star, m: float) -> np.ndarray:
    """``0.5 |grad f|^2 - m (f - f*)`` per sample; PL holds where this is >= 0."""
    grads = np.asarray(grads, dtype=np.float64).reshape(len(np.atleast_1d(fvals)), -1)
    return 0.5 * np.sum(grads**2, axis=1) - m * (np.atleast_1d(fvals) - f_star)


@dataclass
class VerificationReport:
    seed: int
    sample_count: int
    pl_violations: int
    pl_worst_margin: float
    bilip_ratio_min: float
    bilip_ratio_max: float
    bilip_pairs: int
    m: float
    mu: float
    nu: float
    f_star: float

    @property
    def bilip_ok(self) -> bool:
        return self.mu - BILIP_SLACK <= self.bilip_ratio_min and self.bilip_ratio_max <= self.nu + BILIP_SLACK

    @property
    def passed(self) -> bool:
        return self.pl_violations == 0 and self.bilip_ok

    def as_dict(self) -> dict:
        d = asdict(self)
        d["bilip_ok"] = self.bilip_ok
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "VerificationReport":
        d = json.loads(text)
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


@dataclass
class PLCheck:
    violations: int
    worst_margin: float
    f_star: float
    samples: int


def pl_check_samples(net: PLNet, X, P=None, cfg: SolverConfig = SolverConfig(), f_star=None) -> PLCheck:
    """PL inequality at the rows of ``X`` (with conditions ``P`` if any)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if f_star is None:
        if net.conditioned:
            _, f_star = global_min(net, cfg, P)
        else:
            _, f_star = global_min(net, cfg)
    fv = f_eval(net, X, P)
    margins = pl_margins(fv, grad_f(net, X, P), f_star, net.m)
    return PLCheck(int(np.sum(margins < -PL_SLACK)), float(np.min(margins)), float(np.min(np.atleast_1d(f_star))), len(X))


def _sample_conditions(net: PLNet, rng, count) -> np.ndarray | None:
    if not net.conditioned:
        return None
    return _uniform(rng, _domain(None, net.g.cond_dim, net.cond_domain), count)


def pl_check(net: PLNet, samples: int = 10_000, seed: int = 0, domain=None, cfg: SolverConfig = SolverConfig(), pairs: int | None = None) -> VerificationReport:
    """Sample the PL inequality and the bi-Lipschitz ratios of ``G``.

    Every random draw comes from ``numpy.random.default_rng(seed)``, so the
    report is reproducible bit for bit.
    """
    rng = np.random.default_rng(seed)
    box = _domain(net, net.n, domain)
    X = _uniform(rng, box, samples)
    P = _sample_conditions(net, rng, samples)
    res = pl_check_samples(net, X, P, cfg)
    pairs = samples if pairs is None else pairs
    lo, hi = empirical_bilip(net.g, pairs, seed=int(rng.integers(2**31)), domain=box, cond_domain=net.cond_domain)
    return VerificationReport(
        seed=seed,
        sample_count=samples,
        pl_violations=res.violations,
        pl_worst_margin=res.worst_margin,
        bilip_ratio_min=lo,
        bilip_ratio_max=hi,
        bilip_pairs=pairs,
        m=net.m,
        mu=net.g.mu,
        nu=net.g.nu,
        f_star=res.f_star,
    )


def bilip_ratios(g, X1, X2, P=None) -> np.ndarray:
    """``|G(x1) - G(x2)| / |x1 - x2|`` row by row."""
    if isinstance(g, ConditionedBiLipModel):
        d = conditioned_forward(g, X1, P) - conditioned_forward(g, X2, P)
    else:
        d = g_forward(g, X1) - g_forward(g, X2)
    return np.linalg.norm(d, axis=1) / np.linalg.norm(X1 - X2, axis=1)


def empirical_bilip(g, pairs: int = 10_000, seed: int = 0, domain=None, local_frac: float = 0.5, local_scale: float = 1e-4, cond_domain=None) -> tuple[float, float]:
    """``(min, max)`` of sampled distance ratios of ``G``.

    A ``local_frac`` share of the pairs are finite-difference pairs (second
    point within ``local_scale`` times the box width); the rest are
    independent uniform draws.
    """
    rng = np.random.default_rng(seed)
    box = _domain(g, g.n, domain)
    X1 = _uniform(rng, box, pairs)
    X2 = _uniform(rng, box, pairs)
    n_local = int(round(local_frac * pairs))
    width = box[:, 1] - box[:, 0]
    X2[:n_local] = X1[:n_local] + local_scale * width * rng.normal(size=(n_local, g.n))
    P = None
    if isinstance(g, ConditionedBiLipModel):
        P = _uniform(rng, _domain(None, g.cond_dim, cond_domain), pairs)
    keep = np.linalg.norm(X1 - X2, axis=1) > 0
    r = bilip_ratios(g, X1[keep], X2[keep], None if P is None else P[keep])
    return float(r.min()), float(r.max())


def descent_probe(net: PLNet, starts, x_star, tol: float = 1e-3, max_iters: int = 5000, p=None) -> np.ndarray:
    """Gradient descent with backtracking from every start; returns final distances to ``x*``."""
    X = np.atleast_2d(np.asarray(starts, dtype=np.float64)).copy()
    step = np.full(len(X), 1.0)
    fx = f_eval(net, X, p)
    for _ in range(max_iters):
        dist = np.linalg.norm(X - x_star, axis=1)
        active = dist > tol
        if not active.any():
            break
        g = grad_f(net, X, p)
        gn2 = np.sum(g * g, axis=1)
        step = np.where(active, step * 2.0, step)
        for _ in range(60):
            trial = X - step[:, None] * g
            ft = f_eval(net, trial, p)
            bad = active & (ft > fx - 0.5 * step * gn2)
            if not bad.any():
                break
            step = np.where(bad, step * 0.5, step)
        X = np.where(active[:, None], trial, X)
        fx = np.where(active, ft, fx)
    return np.linalg.norm(X - x_star, axis=1)


def identity_like(n: int) -> BiLipModel:
    """``G(x) = x`` built from the model family.

    All free parameters are zero, which makes the coupling ``S`` vanish, so the
    single monotone layer reduces to ``mu x`` with ``mu = 1``. Its certified
    upper bound is 2 since the layer family needs ``nu > mu``.
    """
    specs = [OrthogonalSpec(n, False), MonLipSpec(n, (1,), 1.0, 2.0), OrthogonalSpec(n, False)]
    model = BiLipModel(specs, seed=0)
    layer = model.params[1]
    for key in layer:
        layer[key] = np.zeros_like(layer[key])
    return model
