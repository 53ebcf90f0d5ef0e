"""Learned summary networks: set and temporal embedders."""

from src.embeddings.set_embedder import SetEmbedder, embed_set
from src.embeddings.temporal_embedder import TemporalEmbedder, embed_series, rescale_times

__all__ = ["SetEmbedder", "TemporalEmbedder", "embed_set", "embed_series", "rescale_times"]
