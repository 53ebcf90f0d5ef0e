"""Permutation-invariant set embedding (set transformer).

Rows are projected to the model width, passed through self-attention
blocks (permutation equivariant) and pooled by a learned seed query
(permutation invariant). Masked rows never act as keys, so masking a row is
equivalent to deleting it.
"""

from typing import Optional

import numpy as np

from src.attention.attention import AttentionSpec, attention_blocks, key_mask
from src.core.rng import RNG
from src.diffcore.layers import Dense, ParameterStore
from src.diffcore.tensor import Graph, Tensor
from src.embeddings.blocks import PoolingHead, check_rows


class SetEmbedder:
    """Set transformer producing an ``embed_dim`` summary for any cardinality N."""

    kind = "set"

    def __init__(self, name: str, input_dim: int, embed_dim: int, spec: AttentionSpec, blocks: int = 2):
        self.name = name
        self.input_dim = input_dim
        self.embed_dim = embed_dim
        self.spec = spec
        self.input_proj = Dense(f"{name}.input", input_dim, spec.model_dim)
        self.blocks = attention_blocks(name, blocks, spec)
        self.pool = PoolingHead(f"{name}.pool", spec, embed_dim)

    def init_params(self, store: ParameterStore, rng: RNG) -> None:
        self.input_proj.init_params(store, rng)
        for block in self.blocks:
            block.init_params(store, rng)
        self.pool.init_params(store, rng)

    def encode_rows(self, g: Graph, x: Tensor, presence: Optional[np.ndarray] = None) -> Tensor:
        """Per-row features after the self-attention stack, (B, N, model_dim)."""
        h = self.input_proj(g, x)
        mask = key_mask(presence)
        for block in self.blocks:
            h = block(g, h, h, mask)
        return h

    def __call__(self, g: Graph, x: Tensor, presence: Optional[np.ndarray] = None,
                 times: Optional[np.ndarray] = None) -> Tensor:
        return self.pool(g, self.encode_rows(g, x, presence), presence)


def embed_set(X: np.ndarray, embedder: SetEmbedder, params: ParameterStore,
              mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Evaluation-mode set embedding of one dataset (N x d) or a batch (B x N x d).

    Raises:
        ValueError: If there are no rows or every row is masked
    """
    values = np.asarray(X, dtype=np.float64)
    single = values.ndim == 2
    if single:
        values = values[None]
        mask = None if mask is None else np.asarray(mask, dtype=bool)[None]
    check_rows("embed_set", values, mask)
    g = Graph(params)
    out = embedder(g, g.constant(values), mask).numpy()
    return out[0] if single else out
