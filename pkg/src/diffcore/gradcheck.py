"""Finite-difference verification of reverse-mode gradients."""

from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from src.diffcore.layers import ParameterStore
from src.diffcore.tensor import Graph, Tensor, backward


def gradient_check(
    fn: Callable[[Graph], Tensor],
    params: ParameterStore,
    eps: float = 1e-5,
    names: Optional[Sequence[str]] = None,
    floor: float = 1e-3,
) -> Tuple[float, Dict[str, float]]:
    """Compare autodiff gradients of a scalar function against central differences.

    ``fn`` builds an evaluation-mode graph from the store it is given and
    returns a scalar tensor. The relative error per element is
    ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``.

    Returns:
        (max relative error overall, max relative error per parameter)
    """
    graph = Graph(params)
    analytic = backward(graph, fn(graph))
    per_param: Dict[str, float] = {}
    for name in names if names is not None else list(analytic):
        base = params[name].copy()
        numeric = np.zeros_like(base)
        flat = numeric.reshape(-1)
        for i in range(base.size):
            bumped = base.copy().reshape(-1)
            bumped[i] += eps
            params.set(name, bumped.reshape(base.shape))
            f_plus = fn(Graph(params)).item()
            bumped[i] -= 2 * eps
            params.set(name, bumped.reshape(base.shape))
            f_minus = fn(Graph(params)).item()
            flat[i] = (f_plus - f_minus) / (2 * eps)
        params.set(name, base)
        denom = np.maximum(np.maximum(np.abs(analytic[name]), np.abs(numeric)), floor)
        per_param[name] = float(np.max(np.abs(analytic[name] - numeric) / denom)) if base.size else 0.0
    worst = max(per_param.values()) if per_param else 0.0
    return worst, per_param
