"""Adam with bias correction, written as a pure function over numpy arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdamHyper:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        params = np.asarray(params, dtype=float)
        return cls(np.zeros_like(params), np.zeros_like(params), 0)

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.t)

    def to_json(self) -> dict:
        return {"m": self.m.tolist(), "v": self.v.tolist(), "t": self.t}

    @classmethod
    def from_json(cls, data: dict) -> "AdamState":
        return cls(np.array(data["m"], dtype=float), np.array(data["v"], dtype=float), int(data["t"]))


def adam_step(params, grads, state: AdamState, hyper: AdamHyper):
    """One descent step. Returns (new_params, new_state); inputs are not modified."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    t = state.t + 1
    m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grads
    v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * grads * grads
    m_hat = m / (1.0 - hyper.beta1**t)
    v_hat = v / (1.0 - hyper.beta2**t)
    new_params = params - hyper.learning_rate * m_hat / (np.sqrt(v_hat) + hyper.eps)
    return new_params, AdamState(m, v, t)
