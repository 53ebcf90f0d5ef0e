"""Core systems shared by every package: RNG, errors, events and artifact storage."""

from src.core.errors import (
    ArtifactError,
    ConfigError,
    MultiNPEError,
    NonFiniteError,
    ShapeError,
    TrainingDivergedError,
)
from src.core.events import EventBus
from src.core.rng import RNG

__all__ = [
    "ArtifactError",
    "ConfigError",
    "MultiNPEError",
    "NonFiniteError",
    "ShapeError",
    "TrainingDivergedError",
    "EventBus",
    "RNG",
]
