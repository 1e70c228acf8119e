"""Adam and the one-cycle linear learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError


def one_cycle(step: int, total: int, peak: float, start_frac: float = 0.01, end_frac: float = 0.0) -> float:
    """Linear ramp from ``start_frac*peak`` to ``peak`` at ``total/2``, then down to ``end_frac*peak`` at ``total``."""
    if total <= 0:
        raise ConfigError("schedule needs a positive step count")
    half = total / 2.0
    t = min(max(step, 0), total)
    if t <= half:
        return peak * (start_frac + (1.0 - start_frac) * t / half)
    return peak * (1.0 - (1.0 - end_frac) * (t - half) / (total - half))


@dataclass
class Adam:
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict, lr: float) -> dict:
        """One bias-corrected update of a flat ``name -> array`` mapping."""
        b1, b2 = self.betas
        self.t += 1
        c1, c2 = 1.0 - b1**self.t, 1.0 - b2**self.t
        out = {}
        for k, p in params.items():
            g = grads[k]
            m = self.m[k] = b1 * self.m.get(k, 0.0) + (1 - b1) * g
            v = self.v[k] = b2 * self.v.get(k, 0.0) + (1 - b2) * g * g
            out[k] = p - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return out
