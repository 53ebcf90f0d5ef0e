"""Adam optimizer and the cosine learning-rate schedule."""

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from src.core.errors import NonFiniteError
from src.diffcore.layers import ParameterStore


@dataclass
class AdamState:
    """First/second moment accumulators keyed by parameter name."""
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params: Mapping[str, np.ndarray], beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> "AdamState":
        return cls(
            step=0,
            m={name: np.zeros_like(value) for name, value in params.items()},
            v={name: np.zeros_like(value) for name, value in params.items()},
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(params: ParameterStore, grads: Mapping[str, np.ndarray], state: AdamState,
              lr: float) -> Tuple[ParameterStore, AdamState]:
    """One bias-corrected Adam update.

    Parameters without a gradient entry are left untouched. The store and
    state are updated in place and returned for chaining.

    Raises:
        NonFiniteError: If any gradient holds NaN or infinity (names the parameter)
        KeyError: If the state has no accumulator for a gradient's parameter
    """
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError("adam_step", detail=f"gradient of '{name}'")
        if name not in state.m:
            raise KeyError(f"Adam state has no accumulators for '{name}'")
        if state.m[name].shape != np.shape(grad):
            raise ValueError(f"Adam state shape mismatch for '{name}'")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step
    for name, grad in grads.items():
        m = state.m[name] = b1 * state.m[name] + (1.0 - b1) * grad
        v = state.v[name] = b2 * state.v[name] + (1.0 - b2) * grad * grad
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        params.set(name, params[name] - update)
    return params, state


def cosine_learning_rate(step: int, total_steps: int, initial: float) -> float:
    """Cosine decay from ``initial`` at step 0 to exactly 0 at step ``total_steps - 1``."""
    if total_steps <= 1:
        return initial
    progress = min(max(step, 0), total_steps - 1) / (total_steps - 1)
    return initial * 0.5 * (1.0 + math.cos(math.pi * progress))
