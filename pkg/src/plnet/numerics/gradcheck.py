"""Finite-difference verification of tape gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tape import value_and_grad


def central_diff(f: Callable, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    g = np.empty_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def finite_diff_check(f: Callable, x, h: float = 1e-6) -> float:
    """Max over coordinates of ``|g_ad - g_fd| / (1 + |g_fd|)``.

    ``f`` maps an array to a scalar using tape operations; it is evaluated
    both on a tape (reverse mode) and on plain arrays (central differences).
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    _, (g_ad,) = value_and_grad(f, x)
    g_fd = central_diff(f, x, h)
    if g_fd.size == 0:
        return 0.0
    return float(np.max(np.abs(g_ad - g_fd) / (1.0 + np.abs(g_fd))))
