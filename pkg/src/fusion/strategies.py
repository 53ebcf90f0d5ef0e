"""Fusion strategies over per-source embedders.

* late: concatenate independent per-source embeddings
* early: cross-attend one source to the other, embed only the fused source
* hybrid: cross-attend both ways, embed both fused sources, concatenate
* direct-concat: concatenate sources row-wise on the feature axis and embed once
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Union

import numpy as np

from src.attention.attention import AttentionBlock, AttentionSpec, key_mask
from src.core.errors import ShapeError
from src.core.rng import RNG
from src.diffcore.layers import Dense, ParameterStore
from src.diffcore.tensor import Graph, Tensor, concat
from src.embeddings import SetEmbedder, TemporalEmbedder

Embedder = Union[SetEmbedder, TemporalEmbedder]


class Strategy(str, Enum):
    """Summary-network architectures."""
    ONLY_X = "only-X"
    ONLY_Y = "only-Y"
    EARLY_TO_X = "early-X"
    EARLY_TO_Y = "early-Y"
    LATE = "late"
    HYBRID = "hybrid"
    DIRECT_CONCAT = "direct-concat"

    @classmethod
    def parse(cls, value: Union[str, "Strategy"]) -> "Strategy":
        if isinstance(value, Strategy):
            return value
        aliases = {"early-to-x": cls.EARLY_TO_X, "early-to-y": cls.EARLY_TO_Y}
        for member in cls:
            if member.value.lower() == str(value).lower():
                return member
        if str(value).lower() in aliases:
            return aliases[str(value).lower()]
        raise ValueError(f"Unknown architecture '{value}'. Known: {[m.value for m in cls]}")


@dataclass
class EncodedSource:
    """A source inside a graph: row tensor plus its attention presence and time stamps."""
    rows: Tensor
    presence: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None

    @property
    def count(self) -> int:
        return self.rows.shape[-2]


class CrossAttention:
    """Projects query and key/value sources to the model width and cross-attends.

    The output has one row per query row and ``spec.model_dim`` columns.
    """

    def __init__(self, name: str, query_dim: int, kv_dim: int, spec: AttentionSpec):
        self.name = name
        self.spec = spec
        self.query_proj = Dense(f"{name}.query_proj", query_dim, spec.model_dim)
        self.kv_proj = Dense(f"{name}.kv_proj", kv_dim, spec.model_dim)
        self.block = AttentionBlock(f"{name}.block", spec.model_dim, spec)

    @property
    def output_dim(self) -> int:
        return self.spec.model_dim

    def init_params(self, store: ParameterStore, rng: RNG) -> None:
        self.query_proj.init_params(store, rng)
        self.kv_proj.init_params(store, rng)
        self.block.init_params(store, rng)

    def __call__(self, g: Graph, query: EncodedSource, kv: EncodedSource) -> EncodedSource:
        fused = self.block(g, self.query_proj(g, query.rows), self.kv_proj(g, kv.rows), key_mask(kv.presence))
        return EncodedSource(fused, query.presence, query.times)


def _embed(g: Graph, embedder: Embedder, source: EncodedSource) -> Tensor:
    return embedder(g, source.rows, source.presence, source.times)


def late_fuse(g: Graph, sources: Sequence[EncodedSource], embedders: Sequence[Embedder]) -> Tensor:
    """``concat(s_1(D_1), ..., s_L(D_L))``; output dim is the sum of embedding dims."""
    if len(sources) != len(embedders):
        raise ValueError(f"late_fuse: {len(sources)} sources for {len(embedders)} embedders")
    if len(sources) < 2:
        raise ValueError("late_fuse: needs at least two sources")
    return concat([_embed(g, e, s) for s, e in zip(sources, embedders)], axis=-1)


def early_fuse(g: Graph, target: EncodedSource, other: EncodedSource, cross: CrossAttention,
               embedder: Embedder) -> Tensor:
    """Cross-attend ``target`` to ``other`` and embed the fused target only."""
    return _embed(g, embedder, cross(g, target, other))


def hybrid_fuse(g: Graph, x: EncodedSource, y: EncodedSource, cross_x: CrossAttention, cross_y: CrossAttention,
                embed_x: Embedder, embed_y: Embedder) -> Tensor:
    """``concat(s_x(X~), s_y(Y~))`` with ``X~`` keeping N rows and ``Y~`` keeping M rows."""
    fused_x = cross_x(g, x, y)
    fused_y = cross_y(g, y, x)
    return concat([_embed(g, embed_x, fused_x), _embed(g, embed_y, fused_y)], axis=-1)


def direct_concat(g: Graph, sources: Sequence[EncodedSource], embedder: Embedder) -> Tensor:
    """Concatenate sources on the feature axis and embed the result once.

    A row is attended to when any source observes it.

    Raises:
        ShapeError: If sources disagree on the number of rows
    """
    rows = sources[0].count
    for s in sources[1:]:
        if s.count != rows:
            raise ShapeError("direct_concat", sources[0].rows.shape, s.rows.shape,
                             detail="sources must have identical row counts")
    presence = None
    if any(s.presence is not None for s in sources):
        presence = np.zeros(sources[0].rows.shape[:-1], dtype=bool)
        for s in sources:
            presence |= np.ones_like(presence) if s.presence is None else s.presence
    merged = EncodedSource(concat([s.rows for s in sources], axis=-1), presence, sources[0].times)
    return _embed(g, embedder, merged)


def network_count(strategy: Union[str, Strategy], sources: int) -> int:
    """Number of embedding networks a fusion strategy needs for ``sources`` modalities.

    late: L; early: L(L-1)/2 + 1; hybrid: L! + L.

    Raises:
        ValueError: For fewer than two sources or a single-network strategy
    """
    if sources < 2:
        raise ValueError(f"network_count: fusion needs at least two sources, got {sources}")
    strategy = Strategy.parse(strategy)
    if strategy == Strategy.LATE:
        return sources
    if strategy in (Strategy.EARLY_TO_X, Strategy.EARLY_TO_Y):
        return sources * (sources - 1) // 2 + 1
    if strategy == Strategy.HYBRID:
        return math.factorial(sources) + sources
    raise ValueError(f"network_count: '{strategy.value}' is not a multi-network fusion strategy")


def fused_dims(embedders: List[Embedder]) -> int:
    return int(sum(e.embed_dim for e in embedders))
