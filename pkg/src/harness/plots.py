"""Optional PNG rendering of the report's (x, y, series) plot data."""

import logging
from pathlib import Path
from typing import Optional

import matplotlib
matplotlib.use('Agg')  # no display in batch runs
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)


def plot_series(frame: pd.DataFrame, path: Path, xlabel: str, ylabel: str, title: Optional[str] = None,
                series_filter: Optional[str] = None) -> Path:
    """One line per series of a long-format ``(x, y, series)`` frame."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, group in frame.groupby("series", sort=True):
        if series_filter is not None and series_filter not in str(name):
            continue
        ax.plot(group["x"], group["y"], marker="o", markersize=3, linewidth=1.2, label=str(name))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches='tight', dpi=120)
    plt.close(fig)
    logger.debug("Wrote %s", path)
    return path


def plot_loss_curves(frame: pd.DataFrame, out_dir: Path) -> Path:
    return plot_series(frame, out_dir / "loss_curves.png", "epoch", "negative log posterior",
                       title="Validation loss", series_filter="/val")


def plot_missingness_curves(frame: pd.DataFrame, out_dir: Path) -> list:
    """One figure per metric; series names look like ``<architecture>:<metric>``."""
    written = []
    metrics = sorted({str(s).split(":", 1)[1] for s in frame["series"] if ":" in str(s)})
    for metric in metrics:
        subset = frame[frame["series"].astype(str).str.endswith(f":{metric}")]
        written.append(plot_series(subset, out_dir / f"missingness_{metric}.png", "missing rate", metric))
    return written
