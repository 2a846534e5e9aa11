"""Adam with Nesterov momentum (Nadam) and per-epoch exponential lr decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass
class NadamState:
    """Moment accumulators and hyperparameters.

    The momentum coefficient is held constant at ``beta1`` (no momentum
    schedule).  The learning rate used at epoch ``e`` is ``lr0 * decay**e``.
    """

    lr0: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay: float = 0.97
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def lr(self, epoch: int = 0) -> float:
        return self.lr0 * self.decay ** epoch


def nadam_step(params, grads, state: NadamState, epoch: int = 0):
    """Update ``params`` in place from ``grads``; returns ``(params, state)``.

    Raises :class:`NonFiniteGradient` before touching anything if any
    gradient holds NaN or inf.
    """
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ValueError(f"gradient {name!r} has shape {g.shape}, expected {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"step rejected: non-finite gradient for {name!r} at step {state.t + 1}")

    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    lr = state.lr(epoch)
    # bias corrections for the current gradient and the look-ahead momentum
    c_grad = 1.0 - b1 ** t
    c_mom = 1.0 - b1 ** (t + 1)
    c_sq = 1.0 - b2 ** t
    for name, g in grads.items():
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_bar = b1 * m / c_mom + (1.0 - b1) * g / c_grad
        params[name] -= lr * m_bar / (np.sqrt(v / c_sq) + state.eps)
    if hasattr(params, "version"):
        params.version += 1
    return params, state
