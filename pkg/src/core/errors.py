"""Exception classes raised across the engine.

Each concrete error also subclasses the closest builtin so callers can
catch either the engine type or the builtin one.
"""

from typing import Any, Dict, Optional, Sequence


class MultiNPEError(Exception):
    """Base class for all engine errors."""

    def to_dict(self) -> Dict[str, Any]:
        """Return a JSON-safe description used for CLI error output."""
        payload: Dict[str, Any] = {"error": type(self).__name__, "message": str(self)}
        for key, value in vars(self).items():
            if not key.startswith("_"):
                payload[key] = value if isinstance(value, (str, int, float, bool, type(None))) else str(value)
        return payload


class ShapeError(MultiNPEError, ValueError):
    """Raised when operand shapes are incompatible."""

    def __init__(self, op: str, shape_a: Sequence[int], shape_b: Optional[Sequence[int]] = None, detail: str = ""):
        shapes = f"{tuple(shape_a)}" if shape_b is None else f"{tuple(shape_a)} and {tuple(shape_b)}"
        message = f"{op}: incompatible shapes {shapes}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)
        self.op = op
        self.shape_a = tuple(shape_a)
        self.shape_b = None if shape_b is None else tuple(shape_b)


class NonFiniteError(MultiNPEError, ValueError):
    """Raised when a tensor holds NaN or infinite values."""

    def __init__(self, op: str, detail: str = ""):
        message = f"{op}: non-finite values"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)
        self.op = op


class ConfigError(MultiNPEError, ValueError):
    """Raised for invalid configuration values."""

    def __init__(self, message: str, field_path: str = ""):
        super().__init__(f"{field_path}: {message}" if field_path else message)
        self.field_path = field_path


class TrainingDivergedError(MultiNPEError, RuntimeError):
    """Raised when the loss or a gradient becomes non-finite during training."""

    def __init__(self, epoch: int, batch: int, block: str, detail: str = ""):
        message = f"training diverged at epoch {epoch}, batch {batch} in block '{block}'"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.block = block


class ArtifactError(MultiNPEError, FileNotFoundError):
    """Raised when a dataset, checkpoint or results file is missing or unusable."""

    def __init__(self, kind: str, path: str, detail: str = ""):
        message = f"{kind} not found or unreadable: {path}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)
        self.kind = kind
        self.path = path


def error_payload(exc: BaseException) -> Dict[str, Any]:
    """JSON-safe description of any exception; engine errors keep their extra fields."""
    if isinstance(exc, MultiNPEError):
        return exc.to_dict()
    return {"error": type(exc).__name__, "message": str(exc)}
