"""Bi-Lipschitz networks: orthogonal layers interleaved with monotone-Lipschitz layers.

A model with ``K`` monotone-Lipschitz layers has the layout

    O_1, F_1, O_2, ..., F_K, O_{K+1}

and is certified ``(prod mu_k, prod nu_k)``-bi-Lipschitz. Parameters are kept
as a list of dicts, one per layer, so that training can swap in tape variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from . import monlip
from .cayley import OrthogonalLayer, OrthogonalSpec, orthogonal_forward, orthogonal_inverse
from .errors import ConfigError, DimensionError
from .monlip import MonLipSpec
from .numerics import ad
from .params import copy_tree
from .solvers import SolveResult, SolverConfig, dys_solve, fsm_solve


def _spec_to_dict(spec) -> dict:
    if spec.kind == "orth":
        return {"kind": "orth", "n": spec.n, "rotate": spec.rotate}
    return {
        "kind": "monlip",
        "n": spec.n,
        "widths": list(spec.widths),
        "mu": spec.mu,
        "nu": spec.nu,
        "activation": spec.activation,
        "free_fp": spec.free_fp,
    }


def _spec_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "orth":
        return OrthogonalSpec(int(d["n"]), bool(d.get("rotate", True)))
    if kind == "monlip":
        return MonLipSpec(
            int(d["n"]),
            tuple(d["widths"]),
            float(d["mu"]),
            float(d["nu"]),
            d.get("activation", "relu"),
            bool(d.get("free_fp", False)),
        )
    raise ConfigError(f"unknown layer kind {kind!r}")


class BiLipModel:
    """Composition ``O_{K+1} o F_K o ... o F_1 o O_1`` on ``R^n``.

    ``params`` holds one dict of numpy arrays per layer. The model object is
    treated as immutable by inversion and verification code; training replaces
    ``params`` wholesale through :meth:`with_params`.
    """

    def __init__(self, specs, params=None, seed: int | None = 0):
        specs = list(specs)
        if len(specs) < 3 or len(specs) % 2 == 0:
            raise ConfigError(f"need K+1 orthogonal and K monotone layers, got {len(specs)} layers")
        for i, s in enumerate(specs):
            want = "orth" if i % 2 == 0 else "monlip"
            if s.kind != want:
                raise ConfigError(f"layer {i} must be {want!r}, got {s.kind!r}")
        dims = {s.n for s in specs}
        if len(dims) != 1:
            raise DimensionError(f"all layers must act on the same dimension, got {sorted(dims)}")
        self.specs = specs
        if params is None:
            rng = np.random.default_rng(seed)
            params = [s.init_params(rng) for s in specs]
        if len(params) != len(specs):
            raise ConfigError(f"{len(params)} parameter groups for {len(specs)} layers")
        for s, p in zip(specs, params):
            if s.kind == "monlip":
                s.check_params(p)
            else:
                for name, shape in s.param_shapes().items():
                    if np.shape(ad.value_of(p[name])) != shape:
                        raise DimensionError(f"parameter {name!r} has shape {np.shape(p[name])}, expected {shape}")
        self.params = params
        self.domain = None  # optional (n, 2) sampling box used by verifiers
        self._cache = None

    @classmethod
    def build(
        cls,
        n: int,
        K: int,
        widths,
        mu: float,
        nu: float,
        activation: str = "relu",
        orthogonal: bool = True,
        free_fp: bool = False,
        seed: int | None = 0,
    ) -> "BiLipModel":
        """Model with total bounds ``(mu, nu)`` split evenly: ``mu_k = mu^(1/K)``."""
        if K < 1:
            raise ConfigError(f"K must be at least 1, got {K}")
        if not (0 < mu < nu):
            raise ConfigError(f"need 0 < mu < nu, got ({mu}, {nu})")
        mk, nk = mu ** (1.0 / K), nu ** (1.0 / K)
        specs = [OrthogonalSpec(n, orthogonal)]
        for _ in range(K):
            specs += [MonLipSpec(n, tuple(widths), mk, nk, activation, free_fp), OrthogonalSpec(n, orthogonal)]
        return cls(specs, seed=seed)

    # bookkeeping -------------------------------------------------------------

    @property
    def n(self) -> int:
        return self.specs[0].n

    @property
    def K(self) -> int:
        return len(self.specs) // 2

    @property
    def layer_bounds(self) -> list[tuple[float, float]]:
        return [s.bounds for s in self.specs if s.kind == "monlip"]

    @property
    def mu(self) -> float:
        return float(np.prod([b[0] for b in self.layer_bounds]))

    @property
    def nu(self) -> float:
        return float(np.prod([b[1] for b in self.layer_bounds]))

    @property
    def tau(self) -> float:
        return self.nu / self.mu

    def manifest(self) -> dict:
        return {
            "n": self.n,
            "K": self.K,
            "mu": self.mu,
            "nu": self.nu,
            "tau": self.tau,
            "layers": [_spec_to_dict(s) for s in self.specs],
            "domain": None if self.domain is None else np.asarray(self.domain).tolist(),
        }

    @classmethod
    def from_manifest(cls, manifest: dict, params) -> "BiLipModel":
        model = cls([_spec_from_dict(d) for d in manifest["layers"]], params)
        if manifest.get("domain") is not None:
            model.domain = np.asarray(manifest["domain"], dtype=np.float64)
        return model

    def with_params(self, params) -> "BiLipModel":
        model = type(self)(self.specs, copy_tree(params))
        model.domain = self.domain
        return model

    # evaluation --------------------------------------------------------------

    def materialize(self, params=None) -> list:
        """Per-layer weight objects; cached for the stored numpy parameters."""
        if params is None:
            if self._cache is None:
                self._cache = [s.materialize(p) if s.kind == "orth" else monlip.materialize(s, p) for s, p in zip(self.specs, self.params)]
            return self._cache
        return [s.materialize(p) if s.kind == "orth" else monlip.materialize(s, p) for s, p in zip(self.specs, params)]

    def apply(self, params, x, biases=None):
        """Forward pass with explicit (possibly tape-variable) parameters.

        ``biases`` optionally maps layer index -> replacement bias (``q`` of an
        orthogonal layer, ``b_hat`` of a monotone layer), one row per sample.
        """
        return _forward_layers(self.materialize(params), x, biases)

    def monlip_layers(self) -> list:
        return [w for w in self.materialize() if isinstance(w, monlip.LayerWeights)]

    def certify(self) -> list:
        return [monlip.certificate_check(w) for w in self.monlip_layers()]

    def __call__(self, x):
        return g_forward(self, x)


def _forward_layers(layers, x, biases=None):
    biases = biases or {}
    h = x
    for i, w in enumerate(layers):
        if isinstance(w, OrthogonalLayer):
            h = orthogonal_forward(w, h, biases.get(i))
        else:
            h = monlip.forward(w, h, b_hat=biases.get(i))
    return h


def _check_input(model: BiLipModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != model.n:
        raise DimensionError(f"input has shape {x.shape}, model expects (..., {model.n})")
    return x


def g_forward(model: BiLipModel, x) -> np.ndarray:
    """Evaluate the model on a vector or on every row of a batch."""
    x = _check_input(model, x)
    return _forward_layers(model.materialize(), x)


def _inner_tols(model: BiLipModel, layers, cfg: SolverConfig) -> dict:
    # the post-check bounds the error of layer i by 10 tol_i / mu_i, and the layers
    # inverted after it (those before i) amplify it by their 1 / mu_j; this keeps
    # the end-to-end error within 10 tol
    tols, gain = {}, 1.0
    for i, w in enumerate(layers):
        if isinstance(w, OrthogonalLayer):
            continue
        gain *= w.spec.mu
        tols[i] = cfg.tol * gain / (model.K * sqrt(model.n))
    return tols


@dataclass
class InverseResult:
    x: np.ndarray
    layers: list[SolveResult]

    @property
    def iterations(self) -> int:
        return sum(r.iterations for r in self.layers)


def _inverse_layers(model: BiLipModel, layers, y, cfg: SolverConfig, biases=None, rng=None) -> InverseResult:
    biases = biases or {}
    tols = _inner_tols(model, layers, cfg)
    h = y
    results: list[SolveResult] = []
    for i in range(len(layers) - 1, -1, -1):
        w = layers[i]
        if isinstance(w, OrthogonalLayer):
            h = np.asarray(orthogonal_inverse(w, h, biases.get(i)))
            continue
        inner = cfg.with_(tol=tols[i])
        if inner.kind == "dys":
            u_init = None
            if rng is not None:
                u_init = rng.normal(0.0, 1.0, (np.atleast_2d(h).shape[0], w.spec.m))
            res = dys_solve(w, h, inner, b_hat=biases.get(i), u_init=u_init)
        else:
            x0 = None if rng is None else h + rng.normal(0.0, 1.0, np.shape(h))
            res = fsm_solve(w, h, inner, x0=x0, b_hat=biases.get(i))
        results.append(res)
        h = res.x
    return InverseResult(h, results[::-1])


def g_inverse_info(model: BiLipModel, y, cfg: SolverConfig = SolverConfig(), rng=None) -> InverseResult:
    """Invert layer by layer from the output side; keeps per-layer solver stats.

    ``rng`` randomizes the solver starting points (used by uniqueness probes).
    """
    y = _check_input(model, y)
    return _inverse_layers(model, model.materialize(), y, cfg, rng=rng)


def g_inverse(model: BiLipModel, y, cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    return g_inverse_info(model, y, cfg).x


# bias-conditioned models -------------------------------------------------------


def mlp_init(sizes, rng: np.random.Generator) -> list[dict]:
    """ReLU MLP parameters; the output layer starts at zero."""
    layers = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = i == len(sizes) - 2
        w = np.zeros((b, a)) if last else rng.normal(0.0, sqrt(2.0 / a), (b, a))
        layers.append({"w": w, "b": np.zeros(b)})
    return layers


def mlp_apply(params, p):
    h = p
    for i, layer in enumerate(params):
        h = ad.add(ad.matmul(h, ad.transpose(layer["w"])), layer["b"])
        if i < len(params) - 1:
            h = ad.relu(h)
    return h


class ConditionedBiLipModel:
    """Bi-Lipschitz model in ``x`` whose biases are produced from a condition ``p``.

    ``bias_net`` maps ``p`` (length ``cond_dim``) to the concatenation of the
    hidden bias ``b_hat`` of every monotone layer and the offset ``q`` of every
    orthogonal layer. Weights never depend on ``p``, so each slice ``x -> G(x; p)``
    carries the base model's bounds.
    """

    def __init__(self, base: BiLipModel, cond_dim: int, hidden=(64, 64), net_params=None, seed: int | None = 0):
        if cond_dim < 1:
            raise ConfigError(f"condition dimension must be positive, got {cond_dim}")
        self.base = base
        self.cond_dim = int(cond_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.slots = []
        off = 0
        for i, s in enumerate(base.specs):
            size = s.n if s.kind == "orth" else s.m
            self.slots.append((i, off, off + size))
            off += size
        self.bias_dim = off
        sizes = (self.cond_dim, *self.hidden, self.bias_dim)
        if net_params is None:
            net_params = mlp_init(sizes, np.random.default_rng(seed))
        if [np.shape(l["w"]) for l in net_params] != [(b, a) for a, b in zip(sizes[:-1], sizes[1:])]:
            raise DimensionError("bias network parameters do not match its layer sizes")
        self.net_params = net_params

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def mu(self) -> float:
        return self.base.mu

    @property
    def nu(self) -> float:
        return self.base.nu

    @property
    def tau(self) -> float:
        return self.base.tau

    @property
    def params(self) -> dict:
        return {"g": self.base.params, "h": self.net_params}

    def with_params(self, params) -> "ConditionedBiLipModel":
        return type(self)(self.base.with_params(params["g"]), self.cond_dim, self.hidden, copy_tree(params["h"]))

    def manifest(self) -> dict:
        return {"base": self.base.manifest(), "cond_dim": self.cond_dim, "hidden": list(self.hidden)}

    @classmethod
    def from_manifest(cls, manifest: dict, params) -> "ConditionedBiLipModel":
        base = BiLipModel.from_manifest(manifest["base"], params["g"])
        return cls(base, manifest["cond_dim"], manifest["hidden"], params["h"])

    def split_biases(self, flat) -> dict:
        return {i: ad.take(flat, (slice(None), slice(lo, hi))) for i, lo, hi in self.slots}

    def biases(self, p, net_params=None) -> dict:
        net_params = self.net_params if net_params is None else net_params
        return self.split_biases(mlp_apply(net_params, p))

    def apply(self, params, x, p):
        return self.base.apply(params["g"], x, self.biases(p, params["h"]))


def _check_condition(model: ConditionedBiLipModel, x: np.ndarray, p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim not in (1, 2) or p.shape[-1] != model.cond_dim:
        raise DimensionError(f"condition has shape {p.shape}, model expects (..., {model.cond_dim})")
    rows = np.atleast_2d(x).shape[0]
    P = np.atleast_2d(p)
    if P.shape[0] == 1 and rows > 1:
        P = np.repeat(P, rows, axis=0)
    if P.shape[0] != rows:
        raise DimensionError(f"{P.shape[0]} conditions for {rows} inputs")
    return P


def conditioned_forward(model: ConditionedBiLipModel, x, p) -> np.ndarray:
    """``G(x; p)`` for a vector or batch ``x`` and matching (or shared) ``p``."""
    x = _check_input(model.base, x)
    P = _check_condition(model, x, p)
    out = _forward_layers(model.base.materialize(), np.atleast_2d(x), model.biases(P))
    return out if x.ndim == 2 else out[0]


def conditioned_inverse_info(model: ConditionedBiLipModel, y, p, cfg: SolverConfig = SolverConfig(), rng=None) -> InverseResult:
    y = _check_input(model.base, y)
    P = _check_condition(model, y, p)
    res = _inverse_layers(model.base, model.base.materialize(), np.atleast_2d(y), cfg, model.biases(P), rng)
    if y.ndim == 1:
        res.x = res.x[0]
    return res


def conditioned_inverse(model: ConditionedBiLipModel, y, p, cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    return conditioned_inverse_info(model, y, p, cfg).x
