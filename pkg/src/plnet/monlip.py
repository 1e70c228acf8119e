"""Strongly monotone and Lipschitz residual layers ``F(x) = mu x + H(x)``.

``H`` is a feed-through network: an MLP backbone whose hidden layers all read
the input and all write to the output. The weights are produced from free
parameters through Cayley transforms, so every parameter value yields a layer
that is ``mu``-strongly monotone and ``nu``-Lipschitz.

Free parameters are a name -> array mapping::

    fq        (m, n)          coupling to input/output
    fp        (n, n)          only when ``free_fp`` is set, otherwise fixed at 0
    d{k}      (m_k,)          log-scaling of hidden layer k
    fa{k}     (m_k, m_k)
    fb{k}     (m_{k-1}, m_k)  for k >= 1
    b         (m,)            hidden bias (scaled coordinates)
    by        (n,)            output bias
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .cayley import cayley
from .errors import ConfigError, DimensionError
from .numerics import ad
from .numerics.linalg import max_abs, min_eig

Y_EQ_TOL = 1e-9
MARGIN_TOL = -1e-8


@dataclass(frozen=True)
class MonLipSpec:
    """Architecture and bounds of one monotone-Lipschitz layer."""

    n: int
    widths: tuple[int, ...]
    mu: float
    nu: float
    activation: str = "relu"
    free_fp: bool = False

    kind = "monlip"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.n < 1 or not self.widths or min(self.widths) < 1:
            raise ConfigError(f"bad dimensions n={self.n}, widths={self.widths}")
        if not self.mu > 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if not self.nu > self.mu:
            raise ConfigError(f"nu must exceed mu (gamma = nu - mu > 0), got mu={self.mu}, nu={self.nu}")
        ad.activation(self.activation)

    @property
    def gamma(self) -> float:
        return self.nu - self.mu

    @property
    def depth(self) -> int:
        return len(self.widths)

    @property
    def m(self) -> int:
        return sum(self.widths)

    @property
    def bounds(self) -> tuple[float, float]:
        return self.mu, self.nu

    def param_shapes(self) -> dict[str, tuple]:
        shapes = {"fq": (self.m, self.n)}
        if self.free_fp:
            shapes["fp"] = (self.n, self.n)
        for k, w in enumerate(self.widths):
            shapes[f"d{k}"] = (w,)
            shapes[f"fa{k}"] = (w, w)
            if k:
                shapes[f"fb{k}"] = (self.widths[k - 1], w)
        shapes["b"] = (self.m,)
        shapes["by"] = (self.n,)
        return shapes

    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        params = {}
        for name, shape in self.param_shapes().items():
            if name.startswith(("fa", "fb")):
                params[name] = rng.normal(0.0, 1.0 / sqrt(shape[1]), shape)
            elif name == "fq":
                # std 1/sqrt(m) puts F^T F near I, i.e. Q near column-orthonormal
                params[name] = rng.normal(0.0, 1.0 / sqrt(self.m), shape)
            elif name == "fp":
                params[name] = rng.normal(0.0, 1.0 / sqrt(self.n), shape)
            else:
                params[name] = np.zeros(shape)
        return params

    def check_params(self, params) -> None:
        for name, shape in self.param_shapes().items():
            if name not in params:
                raise DimensionError(f"missing free parameter {name!r}")
            got = np.shape(ad.value_of(params[name]))
            if got != shape:
                raise DimensionError(f"free parameter {name!r} has shape {got}, expected {shape}")


@dataclass
class LayerWeights:
    """Materialized weights in scaled coordinates (``z_hat = Psi z``).

    ``S`` and ``V`` are kept as lists of blocks; ``V[0]`` is ``None``. Entries
    may be tape variables when produced during training.
    """

    spec: MonLipSpec
    S: list
    V: list
    d: list
    b_hat: object
    b_y: object
    pq: np.ndarray | None = field(default=None, repr=False)

    @property
    def mu(self) -> float:
        return self.spec.mu

    @property
    def nu(self) -> float:
        return self.spec.nu

    @property
    def gamma(self) -> float:
        return self.spec.gamma

    def dense_S(self) -> np.ndarray:
        return np.vstack([ad.value_of(s) for s in self.S])

    def dense_V(self) -> np.ndarray:
        w = self.spec.widths
        off = np.concatenate([[0], np.cumsum(w)])
        V = np.zeros((self.spec.m, self.spec.m))
        for k in range(1, len(w)):
            V[off[k] : off[k + 1], off[k - 1] : off[k]] = ad.value_of(self.V[k])
        return V

    def psi(self) -> np.ndarray:
        return np.exp(np.concatenate([ad.value_of(d) for d in self.d]))

    def compact(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Unscaled view ``(U, W, Y, Lambda)`` of ``z = s(Wz + Ux + b)``."""
        g = self.gamma
        S, V, psi = self.dense_S(), self.dense_V(), self.psi()
        U = sqrt(2 * g) * S / psi[:, None]
        W = V * psi[None, :] / psi[:, None]
        Y = sqrt(g / 2) * S.T * psi[None, :]
        Lam = np.diag(0.5 * psi**2)
        return U, W, Y, Lam

    def Q(self) -> np.ndarray:
        return self.pq[self.spec.n :]

    def P(self) -> np.ndarray:
        return self.pq[: self.spec.n]


def materialize(spec: MonLipSpec, params) -> LayerWeights:
    """Map free parameters to certified weights (differentiable)."""
    spec.check_params(params)
    n, widths = spec.n, spec.widths
    fp = params["fp"] if spec.free_fp else np.zeros((n, n))
    pq = cayley(fp, params["fq"])
    Q, off = [], n
    for w in widths:
        Q.append(ad.take(pq, slice(off, off + w)))
        off += w

    S, V = [], [None]
    At_prev = None
    for k, w in enumerate(widths):
        if k == 0:
            At = cayley(params["fa0"])
            S.append(ad.matmul(ad.transpose(At), Q[0]))
        else:
            J = cayley(params[f"fa{k}"], params[f"fb{k}"])
            At = ad.take(J, slice(0, w))
            Bt = ad.take(J, slice(w, None))
            B = ad.transpose(Bt)
            V.append(2.0 * ad.matmul(B, At_prev))
            S.append(ad.sub(ad.matmul(ad.transpose(At), Q[k]), ad.matmul(B, Q[k - 1])))
        At_prev = At
    d = [params[f"d{k}"] for k in range(len(widths))]
    return LayerWeights(spec, S, V, d, params["b"], params["by"], pq=ad.value_of(pq))


def _lin(M, x):
    """``M x`` for a vector, ``x M^T`` for a row batch."""
    if ad.value_of(x).ndim == 1:
        return ad.matmul(M, x)
    return ad.matmul(x, ad.transpose(M))


def _lin_t(M, z):
    """``M^T z`` for a vector, ``z M`` for a row batch."""
    if ad.value_of(z).ndim == 1:
        return ad.matmul(ad.transpose(M), z)
    return ad.matmul(z, M)


def _block(bias, lo, hi):
    if ad.value_of(bias).ndim == 1:
        return ad.take(bias, slice(lo, hi))
    return ad.take(bias, (slice(None), slice(lo, hi)))


def scaled_activation(name: str, v, d):
    """``psi * sigma(v / psi)`` with ``psi = exp(d)``; ReLU-type maps skip the scaling."""
    act = ad.activation(name)
    if name in ("relu", "leaky_relu"):
        return act(v)
    inner = ad.scale_cols(v, ad.exp(ad.neg(d)))
    return ad.scale_cols(act(inner), ad.exp(d))


def forward(w: LayerWeights, x, b_hat=None, b_y=None):
    """Evaluate ``y = mu x + sqrt(gamma/2) S^T z_hat + b_y`` in one explicit pass.

    ``x`` is a vector of length n or a batch with one sample per row. The
    bias overrides accept per-row matrices (used by conditioned models).
    """
    spec = w.spec
    if np.shape(ad.value_of(x))[-1] != spec.n:
        raise DimensionError(f"input has dimension {np.shape(ad.value_of(x))[-1]}, layer expects {spec.n}")
    b_hat = w.b_hat if b_hat is None else b_hat
    b_y = w.b_y if b_y is None else b_y
    c_in, c_out = sqrt(2 * spec.gamma), sqrt(spec.gamma / 2)

    out = ad.add(spec.mu * x, b_y)
    z_prev, off = None, 0
    for k, width in enumerate(spec.widths):
        pre = c_in * _lin(w.S[k], x)
        if k:
            pre = ad.add(pre, _lin(w.V[k], z_prev))
        pre = ad.add(pre, _block(b_hat, off, off + width))
        z = scaled_activation(spec.activation, pre, w.d[k])
        out = ad.add(out, c_out * _lin_t(w.S[k], z))
        z_prev, off = z, off + width
    return out


def forward_compact(w: LayerWeights, x: np.ndarray) -> np.ndarray:
    """Same map through the unscaled ``(U, W, Y)`` weights; numpy only."""
    U, W, Y, _ = w.compact()
    psi = w.psi()
    b = np.asarray(ad.value_of(w.b_hat)) / psi
    act = ad.activation(w.spec.activation)
    X = np.atleast_2d(x)
    z = np.zeros((X.shape[0], w.spec.m))
    off = np.concatenate([[0], np.cumsum(w.spec.widths)])
    for k in range(w.spec.depth):
        lo, hi = off[k], off[k + 1]
        z[:, lo:hi] = act(z @ W[lo:hi].T + X @ U[lo:hi].T + b[lo:hi])
    y = w.spec.mu * X + z @ Y.T + ad.value_of(w.b_y)
    return y if np.ndim(x) == 2 else y[0]


@dataclass
class CertificateReport:
    y_eq_err: float
    h_margin: float
    lemma_margins: tuple[float, float]

    @property
    def certified(self) -> bool:
        return self.y_eq_err <= Y_EQ_TOL and self.h_margin >= MARGIN_TOL

    @property
    def lemma_ok(self) -> bool:
        return min(self.lemma_margins) >= MARGIN_TOL

    def as_dict(self) -> dict:
        return {
            "y_eq_err": self.y_eq_err,
            "h_margin": self.h_margin,
            "lemma_margins": list(self.lemma_margins),
            "certified": self.certified,
            "lemma_ok": self.lemma_ok,
        }


def certificate_check(w: LayerWeights, W_override: np.ndarray | None = None) -> CertificateReport:
    """Check ``Y = U^T Lambda`` and ``2 Lambda - Lambda W - W^T Lambda >= (2/gamma) Y^T Y``.

    ``W_override`` replaces the hidden-to-hidden weight, which is only useful
    for building negative controls.
    """
    U, W, Y, Lam = w.compact()
    if W_override is not None:
        W = W_override
    g = w.gamma
    y_eq_err = max_abs(Y - U.T @ Lam)
    H = 2 * Lam - Lam @ W - W.T @ Lam - (2.0 / g) * Y.T @ Y
    S, V = w.dense_S(), w.dense_V()
    eye = np.eye(w.spec.m)
    lemma = (min_eig(2 * eye - V - V.T), min_eig(2 * eye - S @ S.T))
    return CertificateReport(y_eq_err, min_eig(H), lemma)


@dataclass(frozen=True)
class ParamCount:
    weights: int
    biases: int
    exact_weights: int

    @property
    def total(self) -> int:
        return self.exact_weights + self.biases


def param_count(spec: MonLipSpec) -> ParamCount:
    """Free-parameter count.

    For uniform widths ``d`` with ``n = d`` the weight count follows the
    closed form ``(3L + 1) d^2 + L d``; otherwise it is the exact number of
    weight entries of this implementation (``F^p`` counted even when frozen).
    Biases are reported separately.
    """
    n, widths, L = spec.n, spec.widths, spec.depth
    exact = n * n + spec.m * n
    for k, w in enumerate(widths):
        exact += w + w * w + (widths[k - 1] * w if k else 0)
    biases = spec.m + n
    uniform = len(set(widths)) == 1 and widths[0] == n
    weights = (3 * L + 1) * n * n + L * n if uniform else exact
    return ParamCount(weights=weights, biases=biases, exact_weights=exact)
