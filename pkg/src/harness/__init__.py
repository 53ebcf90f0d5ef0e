"""Experiment harness: configuration, run matrix, manifest, reports and CLI."""

from src.harness.batch_runner import ExperimentRunner, RunOutcome, RunPaths, build_models
from src.harness.config import (
    ExperimentConfig,
    apply_overrides,
    config_hash,
    load_config,
    load_profile,
)
from src.harness.manifest import RunEntry, RunManifest
from src.harness.report import build_report
from src.harness.telemetry import configure_telemetry_mode

__all__ = [
    "ExperimentRunner",
    "RunOutcome",
    "RunPaths",
    "build_models",
    "ExperimentConfig",
    "apply_overrides",
    "config_hash",
    "load_config",
    "load_profile",
    "RunEntry",
    "RunManifest",
    "build_report",
    "configure_telemetry_mode",
]
