"""Scaled dot-product and multi-head attention.

``multi_head_attention`` is the plain multi-head map
``[head_1, ..., head_h] W^O`` with ``head_i = Attention(Q W_i^Q, K W_i^K, V W_i^V)``,
optionally wrapped by a residual connection and layer normalisation.
``AttentionBlock`` adds the position-wise feed-forward sublayer used by the
set/temporal embedders and the fusion blocks.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from src.core.errors import ShapeError
from src.core.rng import RNG
from src.diffcore.layers import FeedForward, LayerNorm, ParameterStore, glorot_uniform
from src.diffcore.tensor import Graph, Tensor, add, affine, concat, dropout, matmul, softmax


def key_mask(presence: Optional[np.ndarray]) -> Optional[np.ndarray]:
    """Turn a (B, n_kv) presence mask into a (B, 1, n_kv) attention mask."""
    if presence is None:
        return None
    presence = np.asarray(presence, dtype=bool)
    return presence[..., None, :]


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, mask: Optional[np.ndarray] = None,
                         return_weights: bool = False):
    """``softmax(Q K^T / sqrt(d_k)) V`` over the last two axes.

    Args:
        q: (..., n_q, d_k) queries
        k: (..., n_kv, d_k) keys
        v: (..., n_kv, d_v) values
        mask: Boolean array broadcastable to (..., n_q, n_kv); False positions
            get minus-infinity logits.
        return_weights: Also return the attention weights tensor.

    Raises:
        ShapeError: If K and V row counts or Q and K key dims differ
        ValueError: If there are no keys or a query row is fully masked
    """
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError("scaled_dot_attention", k.shape, v.shape, detail="K and V row counts differ")
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError("scaled_dot_attention", q.shape, k.shape, detail="Q and K key dims differ")
    if k.shape[-2] == 0:
        raise ValueError("scaled_dot_attention: no keys to attend to")
    scores = affine(matmul(q, k, transpose_b=True), 1.0 / math.sqrt(q.shape[-1]))
    weights = softmax(scores, mask)
    out = matmul(weights, v)
    if return_weights:
        return out, weights
    return out


class MhaWeights:
    """Parameter layout of one multi-head attention map.

    Per-head projections ``W_i^Q`` (query_dim x d_k), ``W_i^K`` and ``W_i^V``
    (kv_dim x d_k), and the output projection ``W^O`` (h*d_k x model_dim).
    The residual connection needs ``query_dim == model_dim``.
    """

    def __init__(
        self,
        name: str,
        query_dim: int,
        kv_dim: int,
        heads: int = 4,
        key_dim: int = 32,
        model_dim: Optional[int] = None,
        dropout_rate: float = 0.0,
        layer_norm: bool = True,
        residual: bool = True,
    ):
        if heads < 1:
            raise ValueError(f"MhaWeights '{name}': head count must be >= 1, got {heads}")
        if key_dim < 1:
            raise ValueError(f"MhaWeights '{name}': key dim must be >= 1, got {key_dim}")
        self.name = name
        self.query_dim = query_dim
        self.kv_dim = kv_dim
        self.heads = heads
        self.key_dim = key_dim
        self.model_dim = model_dim if model_dim is not None else query_dim
        self.dropout_rate = dropout_rate
        self.residual = residual
        if residual and self.query_dim != self.model_dim:
            raise ShapeError(f"MhaWeights[{name}]", (query_dim,), (self.model_dim,),
                             detail="residual needs query dim == model dim")
        self.norm = LayerNorm(f"{name}.norm", self.model_dim) if layer_norm else None

    def head_names(self, i: int) -> Tuple[str, str, str]:
        prefix = f"{self.name}.head{i}"
        return f"{prefix}.query.kernel", f"{prefix}.key.kernel", f"{prefix}.value.kernel"

    @property
    def output_name(self) -> str:
        return f"{self.name}.output.kernel"

    def init_params(self, store: ParameterStore, rng: RNG) -> None:
        for i in range(self.heads):
            wq, wk, wv = self.head_names(i)
            store.add(wq, glorot_uniform(rng, self.query_dim, self.key_dim))
            store.add(wk, glorot_uniform(rng, self.kv_dim, self.key_dim))
            store.add(wv, glorot_uniform(rng, self.kv_dim, self.key_dim))
        store.add(self.output_name, glorot_uniform(rng, self.heads * self.key_dim, self.model_dim))
        if self.norm is not None:
            self.norm.init_params(store, rng)


def multi_head_attention(g: Graph, q_in: Tensor, k_in: Tensor, v_in: Tensor, weights: MhaWeights,
                         mask: Optional[np.ndarray] = None) -> Tensor:
    """Multi-head attention with optional residual + layer norm.

    Output has as many rows as ``q_in`` and ``weights.model_dim`` columns.
    """
    if k_in.shape[-2] != v_in.shape[-2]:
        raise ShapeError("multi_head_attention", k_in.shape, v_in.shape, detail="K and V row counts differ")
    if q_in.shape[-1] != weights.query_dim:
        raise ShapeError("multi_head_attention", q_in.shape, (weights.query_dim,), detail="query feature dim")
    if k_in.shape[-1] != weights.kv_dim or v_in.shape[-1] != weights.kv_dim:
        raise ShapeError("multi_head_attention", k_in.shape, (weights.kv_dim,), detail="key/value feature dim")
    heads = []
    for i in range(weights.heads):
        wq, wk, wv = weights.head_names(i)
        heads.append(scaled_dot_attention(
            matmul(q_in, g.param(wq)),
            matmul(k_in, g.param(wk)),
            matmul(v_in, g.param(wv)),
            mask,
        ))
    merged = heads[0] if len(heads) == 1 else concat(heads, axis=-1)
    out = dropout(matmul(merged, g.param(weights.output_name)), weights.dropout_rate)
    if weights.residual:
        out = add(q_in, out)
    if weights.norm is not None:
        out = weights.norm(g, out)
    return out


@dataclass(frozen=True)
class AttentionSpec:
    """Hyperparameters shared by every attention block of one network."""
    heads: int = 4
    key_dim: int = 32
    model_dim: int = 64
    dropout: float = 0.1
    layer_norm: bool = True
    residual: bool = True
    ffn_hidden: Tuple[int, ...] = (64, 64)


class AttentionBlock:
    """Multi-head attention followed by a feed-forward sublayer.

    ``H = MHA(Q, K, V)`` (residual/LN per spec), then
    ``out = LN(H + FFN(H))`` with the same residual/LN switches.
    """

    def __init__(self, name: str, kv_dim: int, spec: AttentionSpec, query_dim: Optional[int] = None):
        self.name = name
        self.spec = spec
        self.mha = MhaWeights(
            f"{name}.mha",
            query_dim=spec.model_dim if query_dim is None else query_dim,
            kv_dim=kv_dim,
            heads=spec.heads,
            key_dim=spec.key_dim,
            model_dim=spec.model_dim,
            dropout_rate=spec.dropout,
            layer_norm=spec.layer_norm,
            residual=spec.residual,
        )
        self.ffn = FeedForward(f"{name}.ffn", spec.model_dim, spec.ffn_hidden, spec.model_dim,
                               dropout_rate=spec.dropout)
        self.ffn_norm = LayerNorm(f"{name}.ffn_norm", spec.model_dim) if spec.layer_norm else None

    def init_params(self, store: ParameterStore, rng: RNG) -> None:
        self.mha.init_params(store, rng)
        self.ffn.init_params(store, rng)
        if self.ffn_norm is not None:
            self.ffn_norm.init_params(store, rng)

    def __call__(self, g: Graph, q_in: Tensor, kv_in: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        h = multi_head_attention(g, q_in, kv_in, kv_in, self.mha, mask)
        out = self.ffn(g, h)
        if self.spec.residual:
            out = add(h, out)
        if self.ffn_norm is not None:
            out = self.ffn_norm(g, out)
        return out


def attention_blocks(name: str, count: int, spec: AttentionSpec) -> Sequence[AttentionBlock]:
    """``count`` self-attention blocks operating at ``spec.model_dim``."""
    return [AttentionBlock(f"{name}.sab{i}", spec.model_dim, spec) for i in range(count)]
