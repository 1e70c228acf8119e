"""Cayley transform and the orthogonal affine layers built from it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .numerics import ad
from .numerics.linalg import lu_factor, lu_solve


def cayley(G, H=None):
    """Column-orthonormal ``J`` (n x p) from a square ``G`` (p x p) and tall ``H``.

    ``J = [(I+Z)^-1 (I-Z); -2 H (I+Z)^-1]`` with ``Z = G^T - G + H^T H``.
    ``I + Z`` is nonsingular for every input because its symmetric part is
    ``I + H^T H``; the LU factorization still refuses an rcond below 1e-12.
    Differentiable w.r.t. both ``G`` and ``H`` when they are tape variables.
    """
    vg = ad.value_of(G)
    p = vg.shape[0]
    if vg.ndim != 2 or vg.shape[1] != p:
        raise DimensionError(f"G must be square, got {vg.shape}")
    if H is None:
        H = np.zeros((0, p))
    vh = ad.value_of(H)
    if vh.ndim != 2 or vh.shape[1] != p:
        raise DimensionError(f"H must have {p} columns, got {vh.shape}")

    eye = np.eye(p)
    Z = vg.T - vg + vh.T @ vh
    lu = lu_factor(eye + Z)
    top = lu_solve(lu, eye - Z)
    minv = 0.5 * (top + eye)  # (I+Z)^-1, read off the solve above
    bot = -2.0 * vh @ minv
    J = np.vstack([top, bot])

    def vjp(g):
        gt, gb = g[:p], g[p:]
        K = 2.0 * gt - 2.0 * vh.T @ gb
        mbar = -minv.T @ K @ minv.T
        g_G = mbar.T - mbar
        g_H = -2.0 * gb @ minv.T + vh @ (mbar + mbar.T)
        return g_G, g_H

    return ad.make_node(J, (G, H), vjp)


def cayley_oracle(G: np.ndarray, H: np.ndarray | None = None) -> np.ndarray:
    """Literal evaluation through explicit inverses; used only as a cross-check."""
    p = G.shape[0]
    H = np.zeros((0, p)) if H is None else H
    Z = G.T - G + H.T @ H
    inv = np.linalg.inv(np.eye(p) + Z)
    return np.vstack([inv @ (np.eye(p) - Z), -2.0 * H @ inv])


@dataclass(frozen=True)
class OrthogonalSpec:
    """Square orthogonal affine layer ``x -> P x + q`` on ``R^n``.

    With ``rotate=False`` the layer is a pure translation (``P = I``).
    """

    n: int
    rotate: bool = True

    kind = "orth"

    def param_shapes(self) -> dict[str, tuple]:
        shapes = {"g": (self.n, self.n)} if self.rotate else {}
        shapes["q"] = (self.n,)
        return shapes

    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        n = self.n
        params = {"g": rng.normal(0.0, 1.0 / np.sqrt(n), (n, n))} if self.rotate else {}
        params["q"] = np.zeros(n)
        return params

    def materialize(self, params) -> "OrthogonalLayer":
        P = cayley(params["g"]) if self.rotate else np.eye(self.n)
        return OrthogonalLayer(P=P, q=params["q"])

    @property
    def bounds(self) -> tuple[float, float]:
        return 1.0, 1.0


@dataclass
class OrthogonalLayer:
    P: np.ndarray
    q: np.ndarray

    @property
    def n(self) -> int:
        return ad.value_of(self.P).shape[0]

    def orthogonality_error(self) -> float:
        P = ad.value_of(self.P)
        return float(np.max(np.abs(P.T @ P - np.eye(P.shape[0]))))


def _check_dim(layer: OrthogonalLayer, x, name: str):
    if np.shape(ad.value_of(x))[-1] != layer.n:
        raise DimensionError(f"{name} has dimension {np.shape(ad.value_of(x))[-1]}, layer expects {layer.n}")


def orthogonal_forward(layer: OrthogonalLayer, x, q=None):
    """``P x + q`` for a vector or for every row of a batch.

    ``q`` overrides the stored bias; it may be a per-row bias matrix.
    """
    _check_dim(layer, x, "x")
    bias = layer.q if q is None else q
    if ad.value_of(x).ndim == 1:
        return ad.add(ad.matmul(layer.P, x), bias)
    return ad.add(ad.matmul(x, ad.transpose(layer.P)), bias)


def orthogonal_inverse(layer: OrthogonalLayer, y, q=None):
    """``P^T (y - q)``, exact because ``P^T P = I``."""
    _check_dim(layer, y, "y")
    bias = layer.q if q is None else q
    centred = ad.sub(y, bias)
    if ad.value_of(y).ndim == 1:
        return ad.matmul(ad.transpose(layer.P), centred)
    return ad.matmul(centred, layer.P)
