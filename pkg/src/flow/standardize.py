"""z-scoring of parameters and observations.

Parameter moments come from the prior so a flow trained in standardized
space maps back exactly; data moments are estimated on the present rows of
the training set only.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from src.fusion.missingness import MultiSourceDataset, SourceData

MIN_STD = 1e-8


@dataclass
class Standardizer:
    theta_mean: np.ndarray
    theta_std: np.ndarray
    source_mean: List[np.ndarray] = field(default_factory=list)
    source_std: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def fit(cls, data: MultiSourceDataset, theta_mean: np.ndarray, theta_std: np.ndarray) -> "Standardizer":
        """Estimate per-feature data moments from present rows."""
        means, stds = [], []
        for source in data.sources:
            rows = source.values.reshape(-1, source.features)
            if source.presence is not None:
                rows = rows[source.presence.reshape(-1)]
            if rows.shape[0] == 0:
                means.append(np.zeros(source.features))
                stds.append(np.ones(source.features))
                continue
            means.append(rows.mean(axis=0))
            stds.append(np.maximum(rows.std(axis=0), MIN_STD))
        return cls(np.asarray(theta_mean, dtype=np.float64), np.maximum(np.asarray(theta_std, dtype=np.float64), MIN_STD),
                   means, stds)

    @classmethod
    def identity(cls, data: MultiSourceDataset, dim: int) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim),
                   [np.zeros(s.features) for s in data.sources], [np.ones(s.features) for s in data.sources])

    def transform_theta(self, theta: np.ndarray) -> np.ndarray:
        return (np.asarray(theta, dtype=np.float64) - self.theta_mean) / self.theta_std

    def inverse_theta(self, theta: np.ndarray) -> np.ndarray:
        return np.asarray(theta, dtype=np.float64) * self.theta_std + self.theta_mean

    def transform_data(self, data: MultiSourceDataset) -> MultiSourceDataset:
        """Standardize source values; parameters are standardized too when present."""
        if len(data.sources) != len(self.source_mean):
            raise ValueError(f"Standardizer fitted on {len(self.source_mean)} sources, got {len(data.sources)}")
        sources = [
            SourceData(s.name, (s.values - mean) / std, s.presence, s.times)
            for s, mean, std in zip(data.sources, self.source_mean, self.source_std)
        ]
        theta = None if data.theta is None else self.transform_theta(data.theta)
        return MultiSourceDataset(sources, theta, data.conditions, list(data.parameter_names))

    def to_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {"standardizer.theta_mean": self.theta_mean, "standardizer.theta_std": self.theta_std}
        for i, (mean, std) in enumerate(zip(self.source_mean, self.source_std)):
            arrays[f"standardizer.source{i}.mean"] = mean
            arrays[f"standardizer.source{i}.std"] = std
        return arrays

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray]) -> Optional["Standardizer"]:
        if "standardizer.theta_mean" not in arrays:
            return None
        means, stds = [], []
        i = 0
        while f"standardizer.source{i}.mean" in arrays:
            means.append(np.asarray(arrays[f"standardizer.source{i}.mean"]))
            stds.append(np.asarray(arrays[f"standardizer.source{i}.std"]))
            i += 1
        return cls(np.asarray(arrays["standardizer.theta_mean"]), np.asarray(arrays["standardizer.theta_std"]),
                   means, stds)
