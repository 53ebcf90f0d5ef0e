"""Learned-seed attention pooling shared by the set and temporal embedders."""

from typing import Optional

import numpy as np

from src.attention.attention import AttentionBlock, AttentionSpec, key_mask
from src.core.rng import RNG
from src.diffcore.layers import Dense, ParameterStore, glorot_uniform
from src.diffcore.tensor import Graph, Tensor, reduce_sum


class PoolingHead:
    """A single learned query attends over the rows, then projects to ``embed_dim``.

    Invariant to row order because the only row interaction is a softmax
    weighted sum over keys.
    """

    def __init__(self, name: str, spec: AttentionSpec, embed_dim: int):
        self.name = name
        self.spec = spec
        self.block = AttentionBlock(f"{name}.pma", spec.model_dim, spec)
        self.head = Dense(f"{name}.head", spec.model_dim, embed_dim)

    @property
    def seed_name(self) -> str:
        return f"{self.name}.seed"

    def init_params(self, store: ParameterStore, rng: RNG) -> None:
        store.add(self.seed_name, glorot_uniform(rng, 1, self.spec.model_dim))
        self.block.init_params(store, rng)
        self.head.init_params(store, rng)

    def __call__(self, g: Graph, h: Tensor, presence: Optional[np.ndarray] = None) -> Tensor:
        pooled = self.block(g, g.param(self.seed_name), h, key_mask(presence))
        # (B, 1, model_dim) -> (B, model_dim)
        return self.head(g, reduce_sum(pooled, axis=-2))


def check_rows(kind: str, values: np.ndarray, presence: Optional[np.ndarray]) -> None:
    """Reject empty inputs and fully masked inputs for the public embed helpers."""
    if values.shape[-2] == 0:
        raise ValueError(f"{kind}: input has no rows")
    if presence is not None:
        presence = np.asarray(presence, dtype=bool)
        if presence.shape != values.shape[:-1]:
            raise ValueError(f"{kind}: mask shape {presence.shape} does not match rows {values.shape[:-1]}")
        if not np.all(presence.any(axis=-1)):
            raise ValueError(f"{kind}: every row is masked")
