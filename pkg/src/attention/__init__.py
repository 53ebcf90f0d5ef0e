"""Scaled dot-product and multi-head attention."""

from src.attention.attention import (
    AttentionBlock,
    AttentionSpec,
    MhaWeights,
    attention_blocks,
    key_mask,
    multi_head_attention,
    scaled_dot_attention,
)

__all__ = [
    "AttentionBlock",
    "AttentionSpec",
    "MhaWeights",
    "attention_blocks",
    "key_mask",
    "multi_head_attention",
    "scaled_dot_attention",
]
