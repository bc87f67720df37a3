"""Adam optimizer over the named parameter tensors of the classifier.

First and second moment estimates are kept per tensor name, bias-corrected
by the step count, and applied as theta -= lr * m_hat / (sqrt(v_hat) + eps)
with eps added outside the square root.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .errors import NumericError
from .network import DenseParams, Gradients, LstmParams, grad_items, param_items


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"learning rate must be > 0, got {self.lr}")
        if not 0.0 < self.beta1 < 1.0 or not 0.0 < self.beta2 < 1.0:
            raise ValueError(
                f"betas must lie in (0, 1), got {self.beta1}, {self.beta2}"
            )
        if self.eps <= 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")

    @classmethod
    def init(cls, params: LstmParams, dense: DenseParams, lr: float = 1e-3,
             beta1: float = 0.9, beta2: float = 0.999,
             eps: float = 1e-8) -> "AdamState":
        """Zero moments shaped after every trainable tensor."""
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for name, arr in param_items(params, dense):
            state.m[name] = np.zeros_like(arr)
            state.v[name] = np.zeros_like(arr)
        return state


def adam_step(params: LstmParams, dense: DenseParams, grads: Gradients,
              state: AdamState):
    """Apply one update in place; returns (params, dense) for chaining."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, g in grad_items(grads):
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name} at step {state.t}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        target = getattr(params, name) if hasattr(params, name) else getattr(dense, name)
        target -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, dense
