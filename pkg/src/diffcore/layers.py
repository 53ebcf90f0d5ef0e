"""Parameter storage and the small layer vocabulary shared by all networks.

Layers are stateless descriptions: they know their parameter names and
shapes, create initial values in a ``ParameterStore`` and read the bound
values from a ``Graph`` when called. Kernel weights are named ``*.kernel``
and are the only parameters the L2 penalty touches.
"""

import math
from typing import Dict, Iterator, List, Mapping, Optional, Sequence

import numpy as np

from src.core.rng import RNG
from src.diffcore.tensor import Graph, Tensor, add, dropout, layer_norm, matmul, mul, reduce_sum, relu


class ParameterStore(Mapping[str, np.ndarray]):
    """Ordered name -> float64 array map holding every trainable parameter."""

    def __init__(self, values: Optional[Mapping[str, np.ndarray]] = None):
        self._values: Dict[str, np.ndarray] = {}
        for name, value in (values or {}).items():
            self._values[name] = np.array(value, dtype=np.float64)

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self._values:
            raise KeyError(f"Parameter '{name}' already defined")
        self._values[name] = np.array(value, dtype=np.float64)

    def set(self, name: str, value: np.ndarray) -> None:
        if name not in self._values:
            raise KeyError(f"Unknown parameter '{name}'")
        if np.shape(value) != self._values[name].shape:
            raise ValueError(f"Shape mismatch for '{name}': {np.shape(value)} vs {self._values[name].shape}")
        self._values[name] = np.array(value, dtype=np.float64)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._values[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def snapshot(self) -> "ParameterStore":
        """Deep copy, safe to hand to another thread."""
        return ParameterStore(self._values)

    def parameter_count(self) -> int:
        return int(sum(v.size for v in self._values.values()))

    def kernel_names(self) -> List[str]:
        return [name for name in self._values if name.endswith(".kernel")]


def glorot_uniform(rng: RNG, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return np.asarray(rng.uniform(-limit, limit, size=(fan_in, fan_out)), dtype=np.float64)


class Dense:
    """Affine map ``x @ kernel + bias`` over the last axis."""

    def __init__(self, name: str, in_dim: int, out_dim: int, use_bias: bool = True, zero_init: bool = False):
        if in_dim < 0 or out_dim < 1:
            raise ValueError(f"Dense '{name}': invalid dims {in_dim} -> {out_dim}")
        self.name = name
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.use_bias = use_bias
        self.zero_init = zero_init

    def init_params(self, store: ParameterStore, rng: RNG) -> None:
        if self.zero_init or self.in_dim == 0:
            kernel = np.zeros((self.in_dim, self.out_dim))
        else:
            kernel = glorot_uniform(rng, self.in_dim, self.out_dim)
        store.add(f"{self.name}.kernel", kernel)
        if self.use_bias:
            store.add(f"{self.name}.bias", np.zeros(self.out_dim))

    def __call__(self, g: Graph, x: Tensor) -> Tensor:
        out = matmul(x, g.param(f"{self.name}.kernel"))
        if self.use_bias:
            out = add(out, g.param(f"{self.name}.bias"))
        return out


class LayerNorm:
    """Layer normalisation with learned gain (init 1) and bias (init 0)."""

    def __init__(self, name: str, dim: int, eps: float = 1e-5):
        self.name = name
        self.dim = dim
        self.eps = eps

    def init_params(self, store: ParameterStore, rng: RNG) -> None:
        store.add(f"{self.name}.gain", np.ones(self.dim))
        store.add(f"{self.name}.bias", np.zeros(self.dim))

    def __call__(self, g: Graph, x: Tensor) -> Tensor:
        return layer_norm(x, g.param(f"{self.name}.gain"), g.param(f"{self.name}.bias"), self.eps)


class FeedForward:
    """Stack of relu Dense layers followed by a linear projection back to ``out_dim``."""

    def __init__(self, name: str, in_dim: int, hidden: Sequence[int], out_dim: int, dropout_rate: float = 0.0,
                 zero_output: bool = False):
        self.name = name
        dims = [in_dim, *hidden]
        self.hidden = [Dense(f"{name}.dense{i}", dims[i], dims[i + 1]) for i in range(len(hidden))]
        self.output = Dense(f"{name}.out", dims[-1], out_dim, zero_init=zero_output)
        self.dropout_rate = dropout_rate

    def init_params(self, store: ParameterStore, rng: RNG) -> None:
        for layer in self.hidden:
            layer.init_params(store, rng)
        self.output.init_params(store, rng)

    def __call__(self, g: Graph, x: Tensor) -> Tensor:
        for layer in self.hidden:
            x = dropout(relu(layer(g, x)), self.dropout_rate)
        return self.output(g, x)


def l2_penalty(g: Graph, gamma: float, names: Optional[Sequence[str]] = None) -> Optional[Tensor]:
    """``gamma * sum ||W||^2`` over kernel parameters bound in ``g``.

    Returns None when gamma is zero or no kernel is bound.
    """
    if gamma == 0.0:
        return None
    if names is None:
        names = [name for name in g.params if name.endswith(".kernel")]
    total: Optional[Tensor] = None
    for name in names:
        w = g.param(name)
        term = reduce_sum(mul(w, w))
        total = term if total is None else add(total, term)
    if total is None:
        return None
    return mul(total, gamma)
