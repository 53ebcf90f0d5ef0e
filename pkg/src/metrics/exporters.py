"""Exporters for evaluation results.

The per-run metrics CSV holds only deterministic quantities (no wall-clock
data) so repeated runs with the same seeds give byte-identical files.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import pandas as pd

from src.core.errors import ArtifactError
from src.metrics.aggregators import MetricsAggregator, RunMetrics

RUN_COLUMNS = ["architecture", "seed", "missing_rate", "rmse", "ece", "contraction", "mmd"]
TABLE_COLUMNS = ["architecture", "time", "rmse", "ece", "contraction", "mmd"]
FLOAT_FORMAT = "%.10g"


def runs_frame(runs: Iterable[RunMetrics]) -> pd.DataFrame:
    frame = pd.DataFrame([{c: getattr(r, c) for c in RUN_COLUMNS} for r in runs], columns=RUN_COLUMNS)
    return frame.sort_values(["architecture", "seed", "missing_rate"], na_position="first", kind="mergesort") \
        .reset_index(drop=True)


def export_runs_to_csv(runs: Sequence[RunMetrics], filepath: str) -> Path:
    """One row per architecture x seed (x missing rate)."""
    output_path = Path(filepath)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    runs_frame(runs).to_csv(output_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return output_path


def load_runs_from_csv(filepath: str) -> List[RunMetrics]:
    path = Path(filepath)
    if not path.exists():
        raise ArtifactError("metrics", str(path))
    frame = pd.read_csv(path)
    runs = []
    for row in frame.to_dict(orient="records"):
        runs.append(RunMetrics(
            architecture=str(row["architecture"]),
            seed=int(row["seed"]),
            rmse=float(row["rmse"]),
            ece=float(row["ece"]),
            contraction=float(row["contraction"]),
            mmd=None if pd.isna(row["mmd"]) else float(row["mmd"]),
            missing_rate=None if pd.isna(row["missing_rate"]) else float(row["missing_rate"]),
        ))
    return runs


def _cell(stats: Dict[str, float], precision: int = 2) -> str:
    if stats is None:
        return "-"
    if "median" in stats:
        return f"{stats['median']:.{precision}f} ({stats['min']:.{precision}f}, {stats['max']:.{precision}f})"
    return f"{stats['mean']:.{precision}f} ({stats['se']:.{precision}f})"


def summary_table(aggregator: MetricsAggregator, missing_rate: str = "all") -> pd.DataFrame:
    """Table with one row per architecture for one missing-rate label."""
    rows = []
    for arch, by_rate in aggregator.get_summary().items():
        entry = by_rate.get(missing_rate)
        if entry is None:
            rows.append({"architecture": arch, **{c: "failed" for c in TABLE_COLUMNS[1:]}})
            continue
        rows.append({
            "architecture": arch,
            "time": _cell(entry["seconds"], 0),
            "rmse": _cell(entry["rmse"]),
            "ece": _cell(entry["ece"]),
            "contraction": _cell(entry["contraction"]),
            "mmd": _cell(entry["mmd"]),
        })
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def export_summary_to_csv(aggregator: MetricsAggregator, filepath: str, missing_rate: str = "all") -> Path:
    output_path = Path(filepath)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    summary_table(aggregator, missing_rate).to_csv(output_path, index=False, lineterminator="\n")
    return output_path


def export_summary_to_json(aggregator: MetricsAggregator, filepath: str, extra: Dict[str, Any] = None) -> Path:
    """Nested JSON summary (architecture -> missing rate -> statistics)."""
    output_path = Path(filepath)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"summary": aggregator.get_summary(), **(extra or {})}
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    return output_path


def plot_series_frame(rows: Iterable[Dict[str, Any]]) -> pd.DataFrame:
    """Long-format (x, y, series) plot data."""
    return pd.DataFrame(list(rows), columns=["x", "y", "series"])
