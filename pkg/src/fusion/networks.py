"""Summary networks: one per architecture, all mapping a multi-source batch to
a fixed-width embedding that conditions the flow.

``build_summary_network`` is the factory the trainer and the harness use.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from src.attention.attention import AttentionSpec
from src.core.errors import ShapeError
from src.core.rng import RNG
from src.diffcore.layers import ParameterStore
from src.diffcore.tensor import Graph, Tensor, concat
from src.embeddings import SetEmbedder, TemporalEmbedder
from src.fusion.missingness import MultiSourceDataset, attention_presence
from src.fusion.strategies import (
    CrossAttention,
    Embedder,
    EncodedSource,
    Strategy,
    direct_concat,
    early_fuse,
    fused_dims,
    hybrid_fuse,
    late_fuse,
)

SOURCE_KINDS = ("set", "series")


@dataclass
class SourceSpec:
    """Shape of one source as the network sees it (mask column included)."""
    name: str
    kind: str
    input_dim: int
    rows: int = 0

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"Source '{self.name}': kind must be one of {SOURCE_KINDS}, got '{self.kind}'")
        if self.input_dim < 1:
            raise ValueError(f"Source '{self.name}': input_dim must be >= 1")


@dataclass
class SummarySpec:
    """Everything needed to lay out a summary network."""
    architecture: Strategy
    sources: List[SourceSpec]
    embed_dim: int = 10
    embedder_blocks: int = 2
    embed_attention: AttentionSpec = field(default_factory=AttentionSpec)
    fusion_attention: AttentionSpec = field(default_factory=lambda: AttentionSpec(ffn_hidden=(64, 64, 64)))
    condition_dim: int = 0

    def __post_init__(self):
        self.architecture = Strategy.parse(self.architecture)
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        two_source = (Strategy.EARLY_TO_X, Strategy.EARLY_TO_Y, Strategy.HYBRID, Strategy.ONLY_Y)
        if self.architecture in two_source and len(self.sources) != 2:
            raise ValueError(f"'{self.architecture.value}' needs exactly two sources, got {len(self.sources)}")
        if self.architecture in (Strategy.LATE, Strategy.DIRECT_CONCAT) and len(self.sources) < 2:
            raise ValueError(f"'{self.architecture.value}' needs at least two sources")
        if self.architecture == Strategy.DIRECT_CONCAT:
            dims = {s.input_dim for s in self.sources}
            rows = {s.rows for s in self.sources}
            if len(dims) != 1 or len(rows) != 1:
                raise ShapeError("direct-concat", tuple(s.input_dim for s in self.sources),
                                 tuple(s.rows for s in self.sources),
                                 detail="sources must have identical per-row shapes and row counts")


def make_embedder(name: str, source: SourceSpec, input_dim: int, spec: SummarySpec,
                  embed_dim: int = 0) -> Embedder:
    cls = TemporalEmbedder if source.kind == "series" else SetEmbedder
    return cls(name, input_dim, embed_dim or spec.embed_dim, spec.embed_attention, spec.embedder_blocks)


class SummaryNetwork:
    """Base class: owns named sub-networks and appends direct conditions."""

    def __init__(self, spec: SummarySpec):
        self.spec = spec
        self.embedders: Dict[str, Embedder] = {}
        self.cross: Dict[str, CrossAttention] = {}

    @property
    def architecture(self) -> str:
        return self.spec.architecture.value

    @property
    def embedding_dim(self) -> int:
        raise NotImplementedError

    @property
    def output_dim(self) -> int:
        return self.embedding_dim + self.spec.condition_dim

    @property
    def network_names(self) -> List[str]:
        return sorted(self.embedders) + sorted(self.cross)

    def init_params(self, store: ParameterStore, rng: RNG) -> None:
        for i, name in enumerate(sorted(self.cross)):
            self.cross[name].init_params(store, rng.stream(0, i))
        for i, name in enumerate(sorted(self.embedders)):
            self.embedders[name].init_params(store, rng.stream(1, i))

    def encode(self, g: Graph, batch: MultiSourceDataset) -> List[EncodedSource]:
        if len(batch.sources) != len(self.spec.sources):
            raise ValueError(f"{self.architecture}: expected {len(self.spec.sources)} sources, got {len(batch.sources)}")
        encoded = []
        for data, source in zip(batch.sources, self.spec.sources):
            if data.features != source.input_dim:
                raise ShapeError(f"{self.architecture}[{source.name}]", data.values.shape, (source.input_dim,),
                                 detail="feature dim")
            encoded.append(EncodedSource(g.constant(data.values), attention_presence(data.presence), data.times))
        return encoded

    def fuse(self, g: Graph, sources: Sequence[EncodedSource]) -> Tensor:
        raise NotImplementedError

    def __call__(self, g: Graph, batch: MultiSourceDataset) -> Tensor:
        embedding = self.fuse(g, self.encode(g, batch))
        if self.spec.condition_dim:
            if batch.conditions is None or batch.conditions.shape[1] != self.spec.condition_dim:
                raise ShapeError(self.architecture, embedding.shape, (self.spec.condition_dim,),
                                 detail="direct conditions missing or of wrong width")
            embedding = concat([embedding, g.constant(batch.conditions)], axis=-1)
        return embedding

    def embed(self, batch: MultiSourceDataset, params: ParameterStore) -> np.ndarray:
        """Evaluation-mode embeddings as a (B, output_dim) array."""
        g = Graph(params)
        return self(g, batch).numpy()


class SingleSourceNetwork(SummaryNetwork):
    """Baseline that sees one source and ignores the rest."""

    def __init__(self, spec: SummarySpec, index: int):
        super().__init__(spec)
        if index >= len(spec.sources):
            raise ValueError(f"{spec.architecture.value}: source {index} does not exist")
        self.index = index
        source = spec.sources[index]
        self.embedders[source.name] = make_embedder(f"embed_{source.name}", source, source.input_dim, spec)

    @property
    def embedding_dim(self) -> int:
        return self.spec.embed_dim

    def fuse(self, g: Graph, sources: Sequence[EncodedSource]) -> Tensor:
        source = self.spec.sources[self.index]
        s = sources[self.index]
        return self.embedders[source.name](g, s.rows, s.presence, s.times)


class LateFusionNetwork(SummaryNetwork):
    """One independent embedder per source, embeddings concatenated."""

    def __init__(self, spec: SummarySpec):
        super().__init__(spec)
        for source in spec.sources:
            self.embedders[source.name] = make_embedder(f"embed_{source.name}", source, source.input_dim, spec)

    @property
    def embedding_dim(self) -> int:
        return fused_dims(list(self.embedders.values()))

    def fuse(self, g: Graph, sources: Sequence[EncodedSource]) -> Tensor:
        return late_fuse(g, sources, [self.embedders[s.name] for s in self.spec.sources])


class EarlyFusionNetwork(SummaryNetwork):
    """Cross-attention into one target source followed by that source's embedder."""

    def __init__(self, spec: SummarySpec, target: int):
        super().__init__(spec)
        self.target = target
        self.other = 1 - target
        tgt, oth = spec.sources[target], spec.sources[self.other]
        self.cross[f"to_{tgt.name}"] = CrossAttention(f"cross_to_{tgt.name}", tgt.input_dim, oth.input_dim,
                                                      spec.fusion_attention)
        self.embedders[tgt.name] = make_embedder(f"embed_{tgt.name}", tgt, spec.fusion_attention.model_dim, spec)

    @property
    def embedding_dim(self) -> int:
        return self.spec.embed_dim

    def fuse(self, g: Graph, sources: Sequence[EncodedSource]) -> Tensor:
        tgt = self.spec.sources[self.target]
        return early_fuse(g, sources[self.target], sources[self.other], self.cross[f"to_{tgt.name}"],
                          self.embedders[tgt.name])


class HybridFusionNetwork(SummaryNetwork):
    """Cross-attention in both directions, both fused sources embedded and concatenated."""

    def __init__(self, spec: SummarySpec):
        super().__init__(spec)
        x, y = spec.sources
        width = spec.fusion_attention.model_dim
        self.cross[f"to_{x.name}"] = CrossAttention(f"cross_to_{x.name}", x.input_dim, y.input_dim,
                                                    spec.fusion_attention)
        self.cross[f"to_{y.name}"] = CrossAttention(f"cross_to_{y.name}", y.input_dim, x.input_dim,
                                                    spec.fusion_attention)
        self.embedders[x.name] = make_embedder(f"embed_{x.name}", x, width, spec)
        self.embedders[y.name] = make_embedder(f"embed_{y.name}", y, width, spec)

    @property
    def embedding_dim(self) -> int:
        return 2 * self.spec.embed_dim

    def fuse(self, g: Graph, sources: Sequence[EncodedSource]) -> Tensor:
        x, y = self.spec.sources
        return hybrid_fuse(g, sources[0], sources[1], self.cross[f"to_{x.name}"], self.cross[f"to_{y.name}"],
                           self.embedders[x.name], self.embedders[y.name])


class DirectConcatNetwork(SummaryNetwork):
    """Feature-axis concatenation of equally shaped sources, embedded once.

    The embedding is as wide as the late-fusion embedding would be.
    """

    def __init__(self, spec: SummarySpec):
        super().__init__(spec)
        first = spec.sources[0]
        merged = SourceSpec("concat", first.kind, sum(s.input_dim for s in spec.sources), first.rows)
        self.embedders["concat"] = make_embedder("embed_concat", merged, merged.input_dim, spec,
                                                 embed_dim=spec.embed_dim * len(spec.sources))

    @property
    def embedding_dim(self) -> int:
        return self.spec.embed_dim * len(self.spec.sources)

    def fuse(self, g: Graph, sources: Sequence[EncodedSource]) -> Tensor:
        return direct_concat(g, sources, self.embedders["concat"])


def build_summary_network(spec: SummarySpec) -> SummaryNetwork:
    """Instantiate the summary network for ``spec.architecture``."""
    arch = spec.architecture
    if arch == Strategy.ONLY_X:
        return SingleSourceNetwork(spec, 0)
    if arch == Strategy.ONLY_Y:
        return SingleSourceNetwork(spec, 1)
    if arch == Strategy.EARLY_TO_X:
        return EarlyFusionNetwork(spec, 0)
    if arch == Strategy.EARLY_TO_Y:
        return EarlyFusionNetwork(spec, 1)
    if arch == Strategy.LATE:
        return LateFusionNetwork(spec)
    if arch == Strategy.HYBRID:
        return HybridFusionNetwork(spec)
    if arch == Strategy.DIRECT_CONCAT:
        return DirectConcatNetwork(spec)
    raise ValueError(f"Unsupported architecture '{arch}'")


def source_specs(data: MultiSourceDataset, kinds: Sequence[str]) -> List[SourceSpec]:
    """Derive SourceSpecs from a (missingness-encoded) dataset."""
    if len(kinds) != len(data.sources):
        raise ValueError(f"{len(kinds)} source kinds for {len(data.sources)} sources")
    return [SourceSpec(s.name, kind, s.features, s.rows) for s, kind in zip(data.sources, kinds)]
