"""Test fixtures and helper functions for MultiNPE tests."""

from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from src.attention.attention import AttentionSpec
from src.core.rng import RNG
from src.fusion.missingness import MultiSourceDataset, SourceData
from src.harness.config import ExperimentConfig, validate_config
from src.simulators.exp1 import Exp1Config, simulate_exp1_batch


def make_rng(seed: int = 42) -> RNG:
    """Create a deterministic random number generator for testing.

    Args:
        seed: Random seed for reproducible results

    Returns:
        Configured RNG instance
    """
    return RNG(seed)


def tiny_spec(layer_norm: bool = True, dropout: float = 0.0, model_dim: int = 8) -> AttentionSpec:
    """Small attention hyperparameters that keep gradient checks fast."""
    return AttentionSpec(heads=2, key_dim=4, model_dim=model_dim, dropout=dropout, layer_norm=layer_norm,
                         residual=True, ffn_hidden=(8,))


def tiny_exp1_config(dim: int = 3, n_rows: int = 4, n_steps: int = 6) -> Exp1Config:
    return Exp1Config(dim=dim, n_rows=n_rows, n_steps=n_steps, sigma=0.5, horizon=3.0)


def make_exp1_batch(count: int = 8, seed: int = 0, config: Optional[Exp1Config] = None) -> MultiSourceDataset:
    """A small stack of conjugate-model datasets (x: set, y: series)."""
    return simulate_exp1_batch(config or tiny_exp1_config(), count, make_rng(seed))


def make_two_set_batch(count: int = 4, rows: int = 5, dim: int = 2, seed: int = 0) -> MultiSourceDataset:
    """Two random set sources of identical shape, with parameters."""
    rng = make_rng(seed)
    return MultiSourceDataset(
        sources=[SourceData("x", rng.normal(size=(count, rows, dim))),
                 SourceData("y", rng.normal(size=(count, rows, dim)))],
        theta=rng.normal(size=(count, 2)),
        parameter_names=["a", "b"],
    )


def tiny_network_payload() -> Dict[str, Any]:
    attention = {"heads": 2, "key_dim": 4, "model_dim": 8, "dropout": 0.0, "layer_norm": True, "ffn_hidden": [8]}
    return {
        "embedder": {**attention, "blocks": 1, "embed_dim": 4},
        "fusion": attention,
        "flow": {"blocks": 2, "hidden": [8]},
    }


def tiny_experiment_config(output_dir: Path, experiment: str = "exp1",
                           architectures: Optional[List[str]] = None,
                           seeds: Optional[List[int]] = None, **overrides: Any) -> ExperimentConfig:
    """An experiment that simulates, trains and evaluates in seconds."""
    payload: Dict[str, Any] = {
        "experiment": experiment,
        "architectures": architectures or (["only-Y", "late"] if experiment == "exp1" else ["direct-concat", "late"]),
        "seeds": seeds or [0],
        "simulation": {
            "data_seed": 7,
            "exp1": {"dim": 2, "n_rows": 3, "n_steps": 5},
            "exp2": {"trials": 6, "ddm_step": 0.01},
        },
        "network": tiny_network_payload(),
        "train": {"budget": 32, "epochs": 2, "batch_size": 16, "learning_rate": 1e-3},
        "test": {"datasets": 6, "draws": 20, "missing_rates": [0.0, 0.1]},
        "output_dir": str(output_dir),
    }
    payload.update(overrides)
    return validate_config(payload)


def numeric_grid_moments(log_density, grid: np.ndarray):
    """Mean and sd of an unnormalised 1-D log density on a uniform grid."""
    logp = log_density(grid)
    w = np.exp(logp - logp.max())
    w /= w.sum()
    mean = float(np.sum(w * grid))
    sd = float(np.sqrt(np.sum(w * (grid - mean) ** 2)))
    return mean, sd
