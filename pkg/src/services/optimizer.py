"""Adam with per-parameter moments, a warmup/decay schedule and global-norm clipping."""

from __future__ import annotations

import math
from collections.abc import Collection, Mapping
from dataclasses import dataclass, field

import numpy as np

from src.autodiff.tensor import Array
from src.services.network.params import ModelParams


@dataclass(frozen=True)
class LinearWarmupDecay:
    """Learning rate rising linearly to `peak` over `warmup` steps, then decaying linearly.

    Steps are 1-based; the rate after warmup falls by the same amount each
    step and would reach zero one step after `total`.
    """

    peak: float
    warmup: int
    total: int

    def __call__(self, step: int) -> float:
        if step <= 0:
            return 0.0
        if self.warmup > 0 and step <= self.warmup:
            return self.peak * step / self.warmup
        span = max(1, self.total - self.warmup)
        return self.peak * max(0.0, (self.total - step + 1) / span)


def global_norm(grads: Mapping[str, Array]) -> float:
    """L2 norm over all gradient entries, accumulated in 64-bit."""
    return math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))


def clip_global_norm(grads: Mapping[str, Array], max_norm: float) -> tuple[dict[str, Array], float]:
    """Scale gradients so their global norm is at most max_norm.

    Returns:
        (clipped gradients, norm before clipping).
    """
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return dict(grads), norm
    factor = max_norm / norm
    return {n: (g * factor).astype(g.dtype) for n, g in grads.items()}, norm


@dataclass
class AdamState:
    """First and second moments and the update count of every parameter."""

    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)
    t: dict[str, int] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, params: ModelParams) -> AdamState:
        return cls(
            m={n: np.zeros_like(a) for n, a in params.arrays.items()},
            v={n: np.zeros_like(a) for n, a in params.arrays.items()},
            t=dict.fromkeys(params.arrays, 0),
        )

    def copy(self) -> AdamState:
        return AdamState(
            m={n: a.copy() for n, a in self.m.items()},
            v={n: a.copy() for n, a in self.v.items()},
            t=dict(self.t),
        )


@dataclass(frozen=True)
class Adam:
    """Adam update rule; state lives in AdamState so it can be checkpointed."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def step(
        self,
        params: ModelParams,
        state: AdamState,
        grads: Mapping[str, Array],
        lr: float,
        names: Collection[str] | None = None,
    ) -> None:
        """Update parameters that have a gradient.

        Args:
            params: Parameters, updated by replacing arrays (never in place).
            state: Moments, updated alongside.
            grads: Gradient per parameter name.
            lr: Learning rate for this update.
            names: Restrict the update to these names.
        """
        for name, grad in grads.items():
            if names is not None and name not in names:
                continue
            param = params.arrays[name]
            g = grad.astype(param.dtype, copy=False)
            t = state.t[name] + 1
            m = self.beta1 * state.m[name] + (1.0 - self.beta1) * g
            v = self.beta2 * state.v[name] + (1.0 - self.beta2) * np.square(g)
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            update = lr * m_hat / (np.sqrt(v_hat) + self.eps)
            params.arrays[name] = (param - update).astype(param.dtype)
            state.m[name] = m.astype(param.dtype)
            state.v[name] = v.astype(param.dtype)
            state.t[name] = t
