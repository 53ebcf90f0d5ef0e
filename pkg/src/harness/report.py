"""Report generation from an evaluated output directory.

Writes into ``<output>/report``:

    summary.json               architecture -> missing rate -> statistics
    summary.csv                table for exp1 (one row per architecture)
    summary_rate_<r>.csv       one table per evaluated missing rate (exp2)
    loss_curves.csv            (x=epoch, y=loss, series=<arch>/<seed>/<train|val>)
    missingness_curve.csv      (x=rate, y=median over seeds, series=<arch>:<metric>)  exp2 only
    *.png                      when ``plots`` is enabled
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from src.core.errors import ArtifactError
from src.core.storage import read_json
from src.harness.batch_runner import RunPaths, load_run_metrics
from src.harness.config import ExperimentConfig
from src.harness.manifest import EVALUATED, FAILED, TRAINED, RunManifest
from src.metrics.aggregators import MetricsAggregator
from src.metrics.exporters import FLOAT_FORMAT, export_summary_to_csv, export_summary_to_json, plot_series_frame

logger = logging.getLogger(__name__)

CURVE_METRICS = ("rmse", "ece", "contraction")


def load_output_config(output_dir: Path) -> ExperimentConfig:
    """The resolved config echo written by the first command run in ``output_dir``."""
    payload = read_json(RunPaths(output_dir).config, kind="config")
    return ExperimentConfig.model_validate(payload["config"])


def collect(output_dir: Path) -> MetricsAggregator:
    """Aggregate every evaluated and failed manifest entry.

    Raises:
        ArtifactError: If the directory holds no evaluated runs
    """
    manifest = RunManifest.load(output_dir)
    paths = RunPaths(output_dir)
    aggregator = MetricsAggregator()
    for entry in manifest.with_status(EVALUATED):
        for run in load_run_metrics(paths.metrics(entry.architecture, entry.seed)):
            run.seconds = entry.seconds
            aggregator.record(run)
    for entry in manifest.with_status(FAILED):
        aggregator.record_failure(entry.architecture, entry.seed)
    if aggregator.get_run_count() == 0:
        raise ArtifactError("metrics", str(output_dir), detail="no evaluated runs")
    return aggregator


def loss_curve_frame(output_dir: Path) -> pd.DataFrame:
    manifest = RunManifest.load(output_dir)
    paths = RunPaths(output_dir)
    rows: List[Dict[str, Any]] = []
    for entry in manifest.with_status(EVALUATED, TRAINED):
        trace_path = paths.trace(entry.architecture, entry.seed)
        if not trace_path.exists():
            continue
        trace = read_json(trace_path, kind="trace")
        for kind in ("train", "val"):
            for epoch, value in enumerate(trace[f"{kind}_loss"], start=1):
                rows.append({"x": epoch, "y": value, "series": f"{entry.architecture}/{entry.seed}/{kind}"})
    return plot_series_frame(rows)


def missingness_curve_frame(aggregator: MetricsAggregator) -> pd.DataFrame:
    """Median across seeds per (architecture, metric) against the evaluation missing rate."""
    rows: List[Dict[str, Any]] = []
    for arch, by_rate in aggregator.get_summary().items():
        for label, entry in sorted(by_rate.items()):
            if label in ("all", "failed_seeds"):
                continue
            for metric in CURVE_METRICS:
                rows.append({"x": float(label), "y": entry[metric]["median"], "series": f"{arch}:{metric}"})
    return plot_series_frame(rows)


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def build_report(output_dir: Path, config: Optional[ExperimentConfig] = None,
                 plots: Optional[bool] = None) -> Dict[str, Path]:
    """Render every report file for ``output_dir``; returns name -> path."""
    output_dir = Path(output_dir)
    config = config or load_output_config(output_dir)
    aggregator = collect(output_dir)
    out = RunPaths(output_dir).report_dir
    written: Dict[str, Path] = {}

    written["summary.json"] = export_summary_to_json(
        aggregator, str(out / "summary.json"), extra={"experiment": config.experiment})
    if config.experiment == "exp1":
        written["summary.csv"] = export_summary_to_csv(aggregator, str(out / "summary.csv"))
    else:
        for rate in config.test.missing_rates:
            label = f"{rate:.3f}"
            written[f"summary_rate_{label}.csv"] = export_summary_to_csv(
                aggregator, str(out / f"summary_rate_{label}.csv"), missing_rate=label)

    losses = loss_curve_frame(output_dir)
    written["loss_curves.csv"] = _write_frame(losses, out / "loss_curves.csv")
    curve = None
    if config.experiment == "exp2":
        curve = missingness_curve_frame(aggregator)
        written["missingness_curve.csv"] = _write_frame(curve, out / "missingness_curve.csv")

    if config.plots if plots is None else plots:
        from src.harness.plots import plot_loss_curves, plot_missingness_curves

        if not losses.empty:
            written["loss_curves.png"] = plot_loss_curves(losses, out)
        if curve is not None and not curve.empty:
            for path in plot_missingness_curves(curve, out):
                written[path.name] = path

    logger.info("Report written to %s (%d files)", out, len(written))
    return written
