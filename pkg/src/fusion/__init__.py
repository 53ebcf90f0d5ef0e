"""Multi-source fusion: missing-data encoding, fusion strategies and summary networks."""

from src.fusion.missingness import (
    MISSING_FILL,
    MissingnessMask,
    MultiSourceDataset,
    SourceData,
    apply_missingness,
    attention_presence,
)
from src.fusion.networks import (
    SourceSpec,
    SummaryNetwork,
    SummarySpec,
    build_summary_network,
    source_specs,
)
from src.fusion.strategies import (
    CrossAttention,
    EncodedSource,
    Strategy,
    direct_concat,
    early_fuse,
    hybrid_fuse,
    late_fuse,
    network_count,
)

__all__ = [
    "MISSING_FILL",
    "MissingnessMask",
    "MultiSourceDataset",
    "SourceData",
    "apply_missingness",
    "attention_presence",
    "SourceSpec",
    "SummaryNetwork",
    "SummarySpec",
    "build_summary_network",
    "source_specs",
    "CrossAttention",
    "EncodedSource",
    "Strategy",
    "direct_concat",
    "early_fuse",
    "hybrid_fuse",
    "late_fuse",
    "network_count",
]
