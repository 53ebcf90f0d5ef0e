"""Experiment configuration: pydantic models, file loading, overrides and profiles.

A config is one JSON or YAML document validated against ``ExperimentConfig``.
CLI ``--set a.b=value`` flags override individual fields by dotted path.
"""

import copy
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.attention.attention import AttentionSpec
from src.core.errors import ConfigError
from src.flow.trainer import TrainConfig
from src.fusion.strategies import Strategy
from src.simulators.exp1 import Exp1Config
from src.simulators.exp2 import Exp2Config

OUTPUT_ROOT_ENV = "MULTINPE_OUTPUT_ROOT"
CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"

EXP1_ARCHITECTURES = ["only-X", "only-Y", "early-X", "early-Y", "late", "hybrid"]
EXP2_ARCHITECTURES = ["direct-concat", "late", "hybrid"]
EXP2_MISSING_SWEEP = [0.0, 0.025, 0.05, 0.075, 0.10, 0.125, 0.15]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AttentionConfig(_Model):
    """Hyperparameters of a stack of attention blocks."""
    heads: int = Field(4, ge=1)
    key_dim: int = Field(32, ge=1)
    model_dim: int = Field(64, ge=1)
    dropout: float = Field(0.1, ge=0, lt=1)
    layer_norm: bool = True
    residual: bool = True
    ffn_hidden: List[int] = Field(default_factory=lambda: [64, 64])

    def to_spec(self) -> AttentionSpec:
        return AttentionSpec(self.heads, self.key_dim, self.model_dim, self.dropout, self.layer_norm,
                             self.residual, tuple(self.ffn_hidden))


class EmbedderConfig(AttentionConfig):
    """Per-source set / temporal embedder."""
    blocks: int = Field(2, ge=1)
    embed_dim: int = Field(10, ge=1)


class FusionBlockConfig(AttentionConfig):
    """Cross-attention blocks of early and hybrid fusion."""
    ffn_hidden: List[int] = Field(default_factory=lambda: [64, 64, 64])


class FlowConfig(_Model):
    blocks: int = Field(8, ge=1)
    hidden: List[int] = Field(default_factory=lambda: [32])
    clamp: float = Field(1.9, gt=0)
    dropout: float = Field(0.0, ge=0, lt=1)


class NetworkConfig(_Model):
    embedder: EmbedderConfig = Field(default_factory=EmbedderConfig)
    fusion: FusionBlockConfig = Field(default_factory=FusionBlockConfig)
    flow: FlowConfig = Field(default_factory=FlowConfig)


class SimulationConfig(_Model):
    """Simulator settings plus the seed of the shared training/test data."""
    data_seed: int = 0
    exp1: Exp1Config = Field(default_factory=Exp1Config)
    exp2: Exp2Config = Field(default_factory=Exp2Config)


class EvaluationConfig(_Model):
    """Test suite sizes: J datasets with S posterior draws each."""
    datasets: int = Field(1000, ge=1)
    draws: int = Field(1000, ge=2)
    mmd_datasets: Optional[int] = Field(None, ge=1)
    missing_rates: List[float] = Field(default_factory=lambda: list(EXP2_MISSING_SWEEP))

    @field_validator("missing_rates")
    @classmethod
    def _check_rates(cls, value: List[float]) -> List[float]:
        if any(not 0.0 <= r < 1.0 for r in value):
            raise ValueError(f"missing rates must lie in [0, 1), got {value}")
        return value


class ExperimentConfig(_Model):
    """One benchmark matrix: architectures x seeds on a shared simulated training set."""
    experiment: Literal["exp1", "exp2"] = "exp1"
    architectures: List[str] = Field(default_factory=lambda: list(EXP1_ARCHITECTURES))
    seeds: List[int] = Field(default_factory=lambda: [0, 1])
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    test: EvaluationConfig = Field(default_factory=EvaluationConfig)
    output_dir: str = Field(default_factory=lambda: os.environ.get(OUTPUT_ROOT_ENV, "results"))
    workers: int = Field(1, ge=1)
    plots: bool = False

    @field_validator("architectures")
    @classmethod
    def _known_architectures(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("at least one architecture is required")
        names = [Strategy.parse(v).value for v in value]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate architectures in {value}")
        return names

    @field_validator("seeds")
    @classmethod
    def _unique_seeds(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one seed is required")
        if len(set(value)) != len(value):
            raise ValueError(f"duplicate seeds in {value}")
        return value

    @model_validator(mode="after")
    def _architectures_fit_experiment(self) -> "ExperimentConfig":
        if self.experiment == "exp1" and Strategy.DIRECT_CONCAT.value in self.architectures:
            raise ValueError("direct-concat is only defined for exp2 (sources of identical shape)")
        if self.experiment == "exp2":
            early = [a for a in self.architectures if a.startswith("early")]
            if early:
                raise ValueError(f"{early} are not part of the exp2 comparison set")
        return self

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    @property
    def simulator(self) -> Union[Exp1Config, Exp2Config]:
        return self.simulation.exp1 if self.experiment == "exp1" else self.simulation.exp2

    @property
    def training_missing_rate(self) -> Optional[Tuple[float, float]]:
        return self.simulation.exp2.missing_rate if self.experiment == "exp2" else None

    @property
    def evaluation_missing_rates(self) -> List[Optional[float]]:
        return list(self.test.missing_rates) if self.experiment == "exp2" else [None]


# ============================================================================
# LOADING
# ============================================================================

def _raise_config_error(exc: ValidationError) -> None:
    first = exc.errors()[0]
    path = ".".join(str(p) for p in first.get("loc", ()))
    raise ConfigError(first.get("msg", str(exc)), path) from exc


def validate_config(payload: Dict[str, Any]) -> ExperimentConfig:
    """Validate a raw mapping.

    Raises:
        ConfigError: Naming the first offending field path
    """
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as exc:
        _raise_config_error(exc)
        raise  # unreachable


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}", "config")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        payload = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}", "config") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path} must contain a mapping", "config")
    return payload


def load_config(path: Union[str, Path], overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Load a JSON/YAML config file and apply dotted overrides."""
    return validate_config(apply_overrides(read_config_file(path), overrides))


def load_profile(name: str, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Load one of the named profiles shipped in ``configs/``."""
    path = CONFIG_DIR / f"{name}.yaml"
    if not path.exists():
        raise ConfigError(f"unknown profile '{name}'; known: {available_profiles()}", "profile")
    return load_config(path, overrides)


def available_profiles() -> List[str]:
    return sorted(p.stem for p in CONFIG_DIR.glob("*.yaml"))


def _parse_value(text: str) -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def apply_overrides(payload: Union[Dict[str, Any], ExperimentConfig], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply ``a.b.c=value`` overrides (values parsed as YAML scalars/lists).

    Raises:
        ConfigError: For malformed overrides or paths through non-mappings
    """
    data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else copy.deepcopy(payload)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' must look like key.path=value", item)
        key, raw = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ConfigError(f"override '{item}' has an empty key", item)
        node = data
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"'{part}' is not a section", key)
            node = child
        node[parts[-1]] = _parse_value(raw)
    return data


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form.

    The matrix axes (architectures, seeds) and output-only fields are left
    out; manifest entries are keyed by (architecture, seed).
    """
    payload = config.model_dump(mode="json", exclude={"architectures", "seeds", "output_dir", "workers", "plots"})
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def config_schema() -> Dict[str, Any]:
    return ExperimentConfig.model_json_schema()
