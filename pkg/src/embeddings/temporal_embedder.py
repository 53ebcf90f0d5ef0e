"""Temporal embedding for time series.

Each step gets a learned linear encoding of its (rescaled) time stamp added
to its projected value, so order information survives the self-attention
stack. Pooling is the same learned-seed attention as the set embedder.
"""

from typing import Optional

import numpy as np

from src.attention.attention import AttentionSpec, attention_blocks, key_mask
from src.core.rng import RNG
from src.diffcore.layers import Dense, ParameterStore
from src.diffcore.tensor import Graph, Tensor, add
from src.embeddings.blocks import PoolingHead, check_rows


def rescale_times(times: np.ndarray) -> np.ndarray:
    """Map strictly increasing time stamps onto [0, 1] as a (M, 1) column.

    Raises:
        ValueError: If times are not strictly increasing
    """
    t = np.asarray(times, dtype=np.float64).reshape(-1)
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise ValueError("embed_series: times must be strictly increasing")
    if t.size <= 1:
        return np.zeros((t.size, 1))
    return ((t - t[0]) / (t[-1] - t[0]))[:, None]


class TemporalEmbedder:
    """Time-encoded self-attention stack with attention pooling."""

    kind = "series"

    def __init__(self, name: str, input_dim: int, embed_dim: int, spec: AttentionSpec, blocks: int = 2):
        self.name = name
        self.input_dim = input_dim
        self.embed_dim = embed_dim
        self.spec = spec
        self.input_proj = Dense(f"{name}.input", input_dim, spec.model_dim)
        self.time_encoding = Dense(f"{name}.time", 1, spec.model_dim, use_bias=False)
        self.blocks = attention_blocks(name, blocks, spec)
        self.pool = PoolingHead(f"{name}.pool", spec, embed_dim)

    def init_params(self, store: ParameterStore, rng: RNG) -> None:
        self.input_proj.init_params(store, rng)
        self.time_encoding.init_params(store, rng)
        for block in self.blocks:
            block.init_params(store, rng)
        self.pool.init_params(store, rng)

    def encode_rows(self, g: Graph, y: Tensor, times: np.ndarray,
                    presence: Optional[np.ndarray] = None) -> Tensor:
        t = rescale_times(times)
        if t.shape[0] != y.shape[-2]:
            raise ValueError(f"embed_series: {t.shape[0]} time stamps for {y.shape[-2]} steps")
        h = add(self.input_proj(g, y), self.time_encoding(g, g.constant(t)))
        mask = key_mask(presence)
        for block in self.blocks:
            h = block(g, h, h, mask)
        return h

    def __call__(self, g: Graph, y: Tensor, presence: Optional[np.ndarray] = None,
                 times: Optional[np.ndarray] = None) -> Tensor:
        if times is None:
            times = np.arange(y.shape[-2], dtype=np.float64)
        return self.pool(g, self.encode_rows(g, y, times, presence), presence)


def embed_series(Y: np.ndarray, embedder: TemporalEmbedder, params: ParameterStore, times: np.ndarray,
                 mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Evaluation-mode embedding of one series (M x d) or a batch (B x M x d).

    Raises:
        ValueError: If there are no steps, every step is masked, or times are not increasing
    """
    values = np.asarray(Y, dtype=np.float64)
    single = values.ndim == 2
    if single:
        values = values[None]
        mask = None if mask is None else np.asarray(mask, dtype=bool)[None]
    check_rows("embed_series", values, mask)
    g = Graph(params)
    out = embedder(g, g.constant(values), mask, times).numpy()
    return out[0] if single else out
