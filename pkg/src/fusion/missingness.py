"""Multi-source data containers and the missing-data encoding.

Missing rows are overwritten with a constant ``c`` (default -1.0, a value of
measure zero under the simulators) and every source gets its presence mask
appended as an extra feature column.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional

import numpy as np

from src.core.errors import ShapeError

MISSING_FILL = -1.0


@dataclass
class SourceData:
    """One observation source for a stack of datasets.

    Attributes:
        name: Source label ("x", "y", ...)
        values: (B, n, d) observations
        presence: Optional (B, n) bool mask, True = observed
        times: Optional (n,) strictly increasing time stamps (series sources)
    """
    name: str
    values: np.ndarray
    presence: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ShapeError(f"SourceData[{self.name}]", self.values.shape, detail="values must be (B, n, d)")
        if self.presence is not None:
            self.presence = np.asarray(self.presence, dtype=bool)
            if self.presence.shape != self.values.shape[:2]:
                raise ShapeError(f"SourceData[{self.name}]", self.values.shape, self.presence.shape,
                                 detail="presence must be (B, n)")

    @property
    def rows(self) -> int:
        return self.values.shape[1]

    @property
    def features(self) -> int:
        return self.values.shape[2]

    def take(self, index: np.ndarray) -> "SourceData":
        return replace(
            self,
            values=self.values[index],
            presence=None if self.presence is None else self.presence[index],
        )


@dataclass
class MultiSourceDataset:
    """Per-source observation stacks with optional parameters and direct conditions.

    Attributes:
        sources: One SourceData per modality, all with the same leading size B
        theta: Optional (B, p) parameter matrix
        conditions: Optional (B, c) direct conditions appended to the fused embedding
        parameter_names: Names of the p parameter columns
        diagnostics: Simulation counters saved with the dataset file
    """
    sources: List[SourceData]
    theta: Optional[np.ndarray] = None
    conditions: Optional[np.ndarray] = None
    parameter_names: List[str] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.sources:
            raise ValueError("MultiSourceDataset needs at least one source")
        sizes = {s.values.shape[0] for s in self.sources}
        if len(sizes) != 1:
            raise ValueError(f"Sources disagree on the number of datasets: {sorted(sizes)}")
        if self.theta is not None:
            self.theta = np.asarray(self.theta, dtype=np.float64)
            if self.theta.shape[0] != self.size:
                raise ShapeError("MultiSourceDataset", self.theta.shape, detail=f"expected {self.size} rows")
        if self.conditions is not None:
            self.conditions = np.asarray(self.conditions, dtype=np.float64)
            if self.conditions.ndim != 2 or self.conditions.shape[0] != self.size:
                raise ShapeError("MultiSourceDataset", self.conditions.shape, detail="conditions must be (B, c)")

    @property
    def size(self) -> int:
        return self.sources[0].values.shape[0]

    def __len__(self) -> int:
        return self.size

    def take(self, index: np.ndarray) -> "MultiSourceDataset":
        index = np.asarray(index)
        return MultiSourceDataset(
            sources=[s.take(index) for s in self.sources],
            theta=None if self.theta is None else self.theta[index],
            conditions=None if self.conditions is None else self.conditions[index],
            parameter_names=list(self.parameter_names),
        )


@dataclass
class MissingnessMask:
    """Per-source presence vectors (1 = present) and the fill constant."""
    masks: List[np.ndarray]
    fill: float = MISSING_FILL

    def __post_init__(self):
        self.masks = [np.asarray(m, dtype=bool) for m in self.masks]

    @classmethod
    def all_present(cls, data: MultiSourceDataset, fill: float = MISSING_FILL) -> "MissingnessMask":
        return cls([np.ones(s.values.shape[:2], dtype=bool) for s in data.sources], fill)

    def missing_fraction(self) -> float:
        total = sum(m.size for m in self.masks)
        return float(sum((~m).sum() for m in self.masks) / total) if total else 0.0


def apply_missingness(data: MultiSourceDataset, mask: MissingnessMask) -> MultiSourceDataset:
    """Encode missing rows with the fill constant and append mask columns.

    Raises:
        ShapeError: If mask cardinalities do not match the sources
    """
    if len(mask.masks) != len(data.sources):
        raise ValueError(f"{len(mask.masks)} masks for {len(data.sources)} sources")
    encoded = []
    for source, present in zip(data.sources, mask.masks):
        if present.shape != source.values.shape[:2]:
            raise ShapeError(f"apply_missingness[{source.name}]", source.values.shape, present.shape)
        values = np.where(present[..., None], source.values, mask.fill)
        column = present[..., None].astype(np.float64)
        encoded.append(SourceData(source.name, np.concatenate([values, column], axis=-1), present, source.times))
    return MultiSourceDataset(encoded, data.theta, data.conditions, list(data.parameter_names))


def attention_presence(presence: Optional[np.ndarray]) -> Optional[np.ndarray]:
    """Presence mask used inside attention.

    Datasets whose source is entirely missing attend over all of their
    (constant-encoded) rows so the embedding stays finite and differentiable.
    """
    if presence is None:
        return None
    presence = np.asarray(presence, dtype=bool)
    empty = ~presence.any(axis=-1)
    if not empty.any():
        return presence
    adjusted = presence.copy()
    adjusted[empty] = True
    return adjusted
