"""Posterior quality metrics, aggregation across seeds and report exporters."""

from src.metrics.aggregators import MetricsAggregator, RunMetrics, mean_standard_error, median_min_max
from src.metrics.exporters import (
    export_runs_to_csv,
    export_summary_to_csv,
    export_summary_to_json,
    load_runs_from_csv,
    summary_table,
)
from src.metrics.metrics import (
    SBC_QUANTILES,
    contraction,
    contraction_from_variance,
    mean_mmd,
    median_bandwidth,
    mmd,
    rmse,
    sbc_ece,
    sbc_ece_per_dimension,
)

__all__ = [
    "MetricsAggregator",
    "RunMetrics",
    "mean_standard_error",
    "median_min_max",
    "export_runs_to_csv",
    "export_summary_to_csv",
    "export_summary_to_json",
    "load_runs_from_csv",
    "summary_table",
    "SBC_QUANTILES",
    "contraction",
    "contraction_from_variance",
    "mean_mmd",
    "median_bandwidth",
    "mmd",
    "rmse",
    "sbc_ece",
    "sbc_ece_per_dimension",
]
