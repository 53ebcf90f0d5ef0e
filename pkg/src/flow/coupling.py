"""Conditional affine coupling flow ``q(theta | s(D))``.

Each block splits the parameter vector into two halves. The untouched half,
concatenated with the conditioning vector, feeds a small conditioner network
that outputs a log-scale and a shift for the other half::

    v = u * exp(alpha * tanh(s / alpha)) + t

Blocks alternate which half is transformed, so every coordinate is
transformed in half of the blocks. The conditioner's output layer starts at
zero, which makes an untrained flow the identity map.
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import ShapeError
from src.core.rng import RNG
from src.diffcore.layers import FeedForward, ParameterStore
from src.diffcore.tensor import (
    Graph,
    Tensor,
    add,
    affine,
    concat,
    exp,
    mul,
    reduce_sum,
    split,
    tanh,
)

LOG_2PI = math.log(2.0 * math.pi)


class CouplingBlock:
    """One affine coupling layer; ``flip`` selects which half is transformed."""

    def __init__(self, name: str, dim: int, cond_dim: int, hidden: Sequence[int], flip: bool,
                 clamp: float = 1.9, dropout_rate: float = 0.0):
        self.name = name
        self.dim = dim
        self.flip = flip
        self.clamp = clamp
        head = dim // 2
        # sizes of (first, second) halves
        self.sizes = (head, dim - head)
        self.fixed_dim, self.moved_dim = (self.sizes[1], self.sizes[0]) if flip else self.sizes
        self.conditioner = FeedForward(f"{name}.conditioner", self.fixed_dim + cond_dim, hidden,
                                       2 * self.moved_dim, dropout_rate=dropout_rate, zero_output=True)

    def init_params(self, store: ParameterStore, rng: RNG) -> None:
        self.conditioner.init_params(store, rng)

    def _halves(self, z: Tensor) -> Tuple[Tensor, Tensor]:
        first, second = split(z, self.sizes, axis=-1)
        # (fixed, moved)
        return (second, first) if self.flip else (first, second)

    def _join(self, fixed: Tensor, moved: Tensor) -> Tensor:
        return concat([moved, fixed] if self.flip else [fixed, moved], axis=-1)

    def scale_shift(self, g: Graph, fixed: Tensor, cond: Optional[Tensor]) -> Tuple[Tensor, Tensor]:
        h = fixed if cond is None else concat([fixed, cond], axis=-1)
        raw_scale, shift = split(self.conditioner(g, h), [self.moved_dim, self.moved_dim], axis=-1)
        scale = affine(tanh(affine(raw_scale, 1.0 / self.clamp)), self.clamp)
        return scale, shift

    def forward(self, g: Graph, z: Tensor, cond: Optional[Tensor]) -> Tuple[Tensor, Tensor]:
        """Returns the transformed vector and the per-sample log|det J| of this block."""
        fixed, moved = self._halves(z)
        scale, shift = self.scale_shift(g, fixed, cond)
        moved = add(mul(moved, exp(scale)), shift)
        return self._join(fixed, moved), reduce_sum(scale, axis=-1)

    def inverse(self, g: Graph, z: Tensor, cond: Optional[Tensor]) -> Tensor:
        fixed, moved = self._halves(z)
        scale, shift = self.scale_shift(g, fixed, cond)
        moved = mul(add(moved, affine(shift, -1.0)), exp(affine(scale, -1.0)))
        return self._join(fixed, moved)


class CouplingFlow:
    """Stack of alternating coupling blocks over a standard normal base.

    Args:
        dim: Parameter dimension (>= 2)
        cond_dim: Width of the conditioning vector (0 for an unconditional flow)
        blocks: Number of coupling blocks
        hidden: Conditioner hidden layer widths
        clamp: Soft-clamp bound for the log-scales
    """

    def __init__(self, dim: int, cond_dim: int, blocks: int = 8, hidden: Sequence[int] = (32,),
                 clamp: float = 1.9, dropout_rate: float = 0.0, name: str = "flow"):
        if dim < 2:
            raise ValueError(f"CouplingFlow needs a parameter dimension >= 2, got {dim}")
        if blocks < 1:
            raise ValueError(f"CouplingFlow needs at least one block, got {blocks}")
        if clamp <= 0:
            raise ValueError(f"clamp must be positive, got {clamp}")
        self.name = name
        self.dim = dim
        self.cond_dim = cond_dim
        self.blocks: List[CouplingBlock] = [
            CouplingBlock(f"{name}.block{i}", dim, cond_dim, hidden, flip=bool(i % 2), clamp=clamp,
                          dropout_rate=dropout_rate)
            for i in range(blocks)
        ]

    def init_params(self, store: ParameterStore, rng: RNG) -> None:
        for i, block in enumerate(self.blocks):
            block.init_params(store, rng.stream(i))

    def _check(self, theta_shape: Tuple[int, ...], cond: Optional[Tensor]) -> None:
        if theta_shape[-1] != self.dim:
            raise ShapeError("CouplingFlow", theta_shape, (self.dim,), detail="parameter dimension")
        if self.cond_dim and (cond is None or cond.shape[-1] != self.cond_dim):
            raise ShapeError("CouplingFlow", theta_shape, None if cond is None else cond.shape,
                             detail=f"conditioning vector must have {self.cond_dim} columns")

    def forward(self, g: Graph, theta: Tensor, cond: Optional[Tensor] = None) -> Tuple[Tensor, Tensor]:
        """Map theta to the base space; returns ``(z, log|det J|)``."""
        self._check(theta.shape, cond)
        z = theta
        log_det: Optional[Tensor] = None
        for block in self.blocks:
            z, block_log_det = block.forward(g, z, self._cond(cond))
            log_det = block_log_det if log_det is None else add(log_det, block_log_det)
        return z, log_det

    def log_prob(self, g: Graph, theta: Tensor, cond: Optional[Tensor] = None) -> Tensor:
        """Per-sample ``log N(forward(theta); 0, I) + log|det J|``."""
        z, log_det = self.forward(g, theta, cond)
        base = affine(reduce_sum(mul(z, z), axis=-1), -0.5, -0.5 * self.dim * LOG_2PI)
        return add(base, log_det)

    def inverse(self, g: Graph, z: Tensor, cond: Optional[Tensor] = None) -> Tensor:
        self._check(z.shape, cond)
        for block in reversed(self.blocks):
            z = block.inverse(g, z, self._cond(cond))
        return z

    def _cond(self, cond: Optional[Tensor]) -> Optional[Tensor]:
        return cond if self.cond_dim else None


def _pair(g: Graph, flow: CouplingFlow, theta: np.ndarray, cond: Optional[np.ndarray]):
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    cond_t = None
    if cond is not None and flow.cond_dim:
        cond = np.asarray(cond, dtype=np.float64)
        if cond.ndim == 1:
            cond = np.broadcast_to(cond, (theta.shape[0], cond.shape[0]))
        cond_t = g.constant(cond)
    return g.constant(theta), cond_t


def log_prob(flow: CouplingFlow, params: ParameterStore, theta: np.ndarray,
             cond: Optional[np.ndarray] = None) -> np.ndarray:
    """Evaluation-mode log density of each row of ``theta`` given ``cond``.

    Raises:
        ShapeError: If theta or cond widths do not match the flow
    """
    g = Graph(params)
    theta_t, cond_t = _pair(g, flow, theta, cond)
    return flow.log_prob(g, theta_t, cond_t).numpy()


def forward(flow: CouplingFlow, params: ParameterStore, theta: np.ndarray,
            cond: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    g = Graph(params)
    theta_t, cond_t = _pair(g, flow, theta, cond)
    z, log_det = flow.forward(g, theta_t, cond_t)
    return z.numpy(), log_det.numpy()


def inverse(flow: CouplingFlow, params: ParameterStore, z: np.ndarray,
            cond: Optional[np.ndarray] = None) -> np.ndarray:
    g = Graph(params)
    z_t, cond_t = _pair(g, flow, z, cond)
    return flow.inverse(g, z_t, cond_t).numpy()


def sample(flow: CouplingFlow, params: ParameterStore, cond: Optional[np.ndarray], count: int,
           rng: RNG) -> np.ndarray:
    """Draw ``count`` samples per conditioning vector.

    A single conditioning vector (or None) gives ``(count, dim)``; a batch of
    B vectors gives ``(B, count, dim)``.

    Raises:
        ValueError: If count < 1
    """
    if count < 1:
        raise ValueError(f"sample: count must be >= 1, got {count}")
    if cond is None or np.ndim(cond) == 1:
        z = rng.normal(size=(count, flow.dim))
        return inverse(flow, params, z, cond)
    cond = np.asarray(cond, dtype=np.float64)
    batch = cond.shape[0]
    z = rng.normal(size=(batch * count, flow.dim))
    stacked = np.repeat(cond, count, axis=0)
    return inverse(flow, params, z, stacked).reshape(batch, count, flow.dim)
