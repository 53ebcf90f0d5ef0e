"""Reverse-mode automatic differentiation, layers and the Adam optimizer."""

from src.diffcore.tensor import (
    Graph,
    Tensor,
    add,
    affine,
    backward,
    concat,
    dropout,
    exp,
    forward_op,
    layer_norm,
    log,
    matmul,
    mul,
    reduce_mean,
    reduce_sum,
    relu,
    softmax,
    split,
    sub,
    tanh,
)
from src.diffcore.layers import Dense, FeedForward, LayerNorm, ParameterStore, l2_penalty
from src.diffcore.optim import AdamState, adam_step, cosine_learning_rate
from src.diffcore.gradcheck import gradient_check

__all__ = [
    "Graph", "Tensor", "add", "affine", "backward", "concat", "dropout", "exp", "forward_op",
    "layer_norm", "log", "matmul", "mul", "reduce_mean", "reduce_sum", "relu", "softmax", "split",
    "sub", "tanh", "Dense", "FeedForward", "LayerNorm", "ParameterStore", "l2_penalty",
    "AdamState", "adam_step", "cosine_learning_rate", "gradient_check",
]
