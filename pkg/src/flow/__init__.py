"""Conditional normalizing flow: density, sampling, training and checkpoints."""

from src.flow.checkpoint import FORMAT_VERSION, Checkpoint, load_checkpoint, save_checkpoint
from src.flow.coupling import CouplingBlock, CouplingFlow, forward, inverse, log_prob, sample
from src.flow.standardize import Standardizer
from src.flow.trainer import (
    TrainConfig,
    TrainResult,
    init_parameters,
    negative_log_posterior,
    train,
    validation_loss,
)

__all__ = [
    "Checkpoint",
    "load_checkpoint",
    "FORMAT_VERSION",
    "save_checkpoint",
    "CouplingBlock",
    "CouplingFlow",
    "forward",
    "inverse",
    "log_prob",
    "sample",
    "Standardizer",
    "TrainConfig",
    "TrainResult",
    "init_parameters",
    "negative_log_posterior",
    "train",
    "validation_loss",
]
