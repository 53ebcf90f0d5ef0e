"""Telemetry configuration and custom formatters for experiment logging.

Provides three telemetry modes:
- Developer: DEBUG level with timestamps, logger names and per-epoch detail
- Designer: INFO level with per-epoch and per-run summaries
- Quiet: warnings and errors only
"""

import logging
from typing import Optional

from src.core.events import EpochCompleted, EventBus, RunCompleted, RunFailed

TELEMETRY_MODES = ("developer", "designer", "quiet")


class DeveloperFormatter(logging.Formatter):
    """Formatter for Developer mode - structured logging with full context."""

    def __init__(self):
        super().__init__(
            fmt='[%(asctime)s] [%(levelname)s] [%(name)s] %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )


class DesignerFormatter(logging.Formatter):
    """Formatter for Designer mode.

    Records carrying ``architecture``/``seed`` extras are prefixed with the
    run they belong to, so interleaved matrix output stays readable.
    """

    def __init__(self):
        super().__init__(fmt='[%(levelname)s] %(message)s')

    def format(self, record):
        text = super().format(record)
        architecture = getattr(record, 'architecture', None)
        if architecture is None:
            return text
        seed = getattr(record, 'seed', None)
        label = architecture if seed is None else f"{architecture}/{seed}"
        return f"[{label}] {text}"


class RunFilter(logging.Filter):
    """Filter logs by architecture and/or seed.

    Records without run extras (matrix-level messages) always pass.
    """

    def __init__(self, architecture: Optional[str] = None, seed: Optional[int] = None):
        super().__init__()
        self.architecture = architecture
        self.seed = seed

    def filter(self, record):
        if self.architecture is None and self.seed is None:
            return True
        if not hasattr(record, 'architecture'):
            return True
        if self.architecture is not None and record.architecture != self.architecture:
            return False
        if self.seed is not None and getattr(record, 'seed', None) != self.seed:
            return False
        return True


def configure_telemetry_mode(
    mode: str,
    logger_name: str = 'src',
    architecture: Optional[str] = None,
    seed: Optional[int] = None
) -> logging.Logger:
    """Configure logging for a specific telemetry mode.

    Args:
        mode: Telemetry mode - 'developer', 'designer', or 'quiet'
        logger_name: Name of the logger to configure (the package root by default)
        architecture: Optional filter by architecture
        seed: Optional filter by seed

    Returns:
        Configured logger instance

    Raises:
        ValueError: If mode is not recognized
    """
    logger = logging.getLogger(logger_name)
    logger.handlers.clear()
    logger.propagate = False

    handler = logging.StreamHandler()

    mode = mode.lower()
    if mode == 'developer':
        logger.setLevel(logging.DEBUG)
        handler.setFormatter(DeveloperFormatter())
    elif mode == 'designer':
        logger.setLevel(logging.INFO)
        handler.setFormatter(DesignerFormatter())
    elif mode == 'quiet':
        logger.setLevel(logging.WARNING)
        handler.setFormatter(DesignerFormatter())
    else:
        raise ValueError(f"Unknown telemetry mode: {mode}. Use one of {', '.join(TELEMETRY_MODES)}.")

    if architecture is not None or seed is not None:
        handler.addFilter(RunFilter(architecture, seed))

    logger.addHandler(handler)
    return logger


def log_epoch_summary(
    logger: logging.Logger,
    architecture: str,
    seed: int,
    epoch: int,
    train_loss: float,
    val_loss: float,
    learning_rate: float
) -> None:
    """Log one epoch of a training run."""
    extra = {
        'architecture': architecture,
        'seed': seed,
        'epoch': epoch,
        'train_loss': train_loss,
        'val_loss': val_loss,
    }
    logger.info(
        f"epoch {epoch}: train {train_loss:.4f}, val {val_loss:.4f}, lr {learning_rate:.2e}",
        extra=extra
    )


def log_run_summary(
    logger: logging.Logger,
    architecture: str,
    seed: int,
    stage: str,
    seconds: float = 0.0,
    error: Optional[str] = None
) -> None:
    """Log the outcome of one matrix entry stage (train / evaluate)."""
    extra = {'architecture': architecture, 'seed': seed, 'stage': stage}
    if error is not None:
        logger.error(f"{stage} failed: {error}", extra=extra)
    else:
        logger.info(f"{stage} finished in {seconds:.1f}s", extra=extra)


def attach_run_logging(event_bus: EventBus, logger: logging.Logger, architecture: str, seed: int) -> None:
    """Subscribe epoch logging for one run to ``event_bus``."""

    def on_epoch(event: EpochCompleted) -> None:
        log_epoch_summary(logger, architecture, seed, event.epoch, event.train_loss, event.val_loss,
                          event.learning_rate)

    event_bus.subscribe(EpochCompleted, on_epoch, name=f"log:{architecture}/{seed}")


def attach_matrix_logging(event_bus: EventBus, logger: logging.Logger) -> None:
    """Subscribe run completion / failure logging to ``event_bus``."""

    def on_completed(event: RunCompleted) -> None:
        log_run_summary(logger, event.architecture, event.seed, event.stage, event.seconds)

    def on_failed(event: RunFailed) -> None:
        log_run_summary(logger, event.architecture, event.seed, event.stage,
                        error=str(event.error.get("message", event.error)))

    event_bus.subscribe(RunCompleted, on_completed, name="log:completed")
    event_bus.subscribe(RunFailed, on_failed, name="log:failed")
