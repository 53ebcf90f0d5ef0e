"""Aggregation of per-run metrics across seeds.

Table layout: median (min, max) across seeds for training time, RMSE, ECE
and contraction; mean (standard error) for MMD.
"""

import math
import statistics
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

MEDIAN_METRICS = ("seconds", "rmse", "ece", "contraction")


@dataclass
class RunMetrics:
    """Metrics of one (architecture, seed[, missing rate]) evaluation."""
    architecture: str
    seed: int
    rmse: float
    ece: float
    contraction: float
    mmd: Optional[float] = None
    missing_rate: Optional[float] = None
    seconds: Optional[float] = None
    ece_per_dimension: List[float] = field(default_factory=list)

    def __post_init__(self):
        if self.rmse < 0:
            raise ValueError(f"rmse must be >= 0, got {self.rmse}")
        if not 0.0 <= self.ece <= 100.0:
            raise ValueError(f"ece must be in [0, 100], got {self.ece}")
        if self.contraction > 1.0:
            raise ValueError(f"contraction must be <= 1, got {self.contraction}")
        if self.mmd is not None and self.mmd < 0:
            raise ValueError(f"mmd must be >= 0, got {self.mmd}")

    @property
    def extrapolated(self) -> bool:
        """Evaluated beyond the training missing-rate range."""
        return self.missing_rate is not None and self.missing_rate > 0.10 + 1e-12

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def median_min_max(values: List[float]) -> Dict[str, float]:
    if not values:
        return {"median": math.nan, "min": math.nan, "max": math.nan}
    return {"median": statistics.median(values), "min": min(values), "max": max(values)}


def mean_standard_error(values: List[float]) -> Dict[str, float]:
    if not values:
        return {"mean": math.nan, "se": math.nan}
    se = statistics.stdev(values) / math.sqrt(len(values)) if len(values) > 1 else 0.0
    return {"mean": statistics.mean(values), "se": se}


@dataclass
class MetricsAggregator:
    """Collects RunMetrics and failures, then summarises per architecture.

    Groups are keyed by ``(architecture, missing_rate)`` so the missing-data
    sweep aggregates each rate separately.
    """

    _runs: List[RunMetrics] = field(default_factory=list)
    _failures: Dict[str, List[int]] = field(default_factory=dict)

    def record(self, run: RunMetrics) -> None:
        self._runs.append(run)

    def record_failure(self, architecture: str, seed: int) -> None:
        self._failures.setdefault(architecture, []).append(seed)

    @property
    def runs(self) -> List[RunMetrics]:
        return list(self._runs)

    def get_run_count(self) -> int:
        return len(self._runs)

    def get_architectures(self) -> List[str]:
        seen: List[str] = []
        for run in self._runs:
            if run.architecture not in seen:
                seen.append(run.architecture)
        for arch in self._failures:
            if arch not in seen:
                seen.append(arch)
        return seen

    def _groups(self) -> Dict[Tuple[str, Optional[float]], List[RunMetrics]]:
        groups: Dict[Tuple[str, Optional[float]], List[RunMetrics]] = {}
        for run in self._runs:
            groups.setdefault((run.architecture, run.missing_rate), []).append(run)
        return groups

    def get_group_summary(self, runs: List[RunMetrics]) -> Dict[str, Any]:
        summary: Dict[str, Any] = {"seeds": sorted(r.seed for r in runs)}
        for name in MEDIAN_METRICS:
            values = [getattr(r, name) for r in runs if getattr(r, name) is not None]
            summary[name] = median_min_max(values)
        mmd_values = [r.mmd for r in runs if r.mmd is not None]
        summary["mmd"] = mean_standard_error(mmd_values) if mmd_values else None
        return summary

    def get_summary(self) -> Dict[str, Any]:
        """Nested summary: architecture -> missing rate label -> statistics."""
        result: Dict[str, Any] = {}
        for (arch, rate), runs in sorted(self._groups().items(), key=lambda item: (item[0][0], item[0][1] or 0.0)):
            label = "all" if rate is None else f"{rate:.3f}"
            entry = self.get_group_summary(runs)
            entry["extrapolated"] = runs[0].extrapolated
            result.setdefault(arch, {})[label] = entry
        for arch, seeds in sorted(self._failures.items()):
            result.setdefault(arch, {})["failed_seeds"] = sorted(seeds)
        return result
