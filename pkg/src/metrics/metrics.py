"""Posterior quality metrics over a test suite of J datasets.

Draw arrays are ``(J, S, d)`` (S posterior draws per dataset), ground truths
are ``(J, d)``. All metrics are global: they reduce over datasets.
"""

from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist

from src.core.errors import ShapeError

SBC_QUANTILES = np.linspace(0.005, 0.995, 20)
# rows per kernel block when summing Gram matrices
MMD_CHUNK = 2048
# points used for the median-heuristic bandwidth
MMD_BANDWIDTH_POINTS = 2000


def _check_draws(op: str, draws: np.ndarray, truths: Optional[np.ndarray] = None) -> np.ndarray:
    draws = np.asarray(draws, dtype=np.float64)
    if draws.ndim == 2:
        draws = draws[..., None]
    if draws.ndim != 3:
        raise ShapeError(op, draws.shape, detail="draws must be (J, S, d)")
    if draws.shape[1] == 0:
        raise ValueError(f"{op}: need at least one posterior draw per dataset")
    if truths is not None:
        truths = np.asarray(truths, dtype=np.float64).reshape(draws.shape[0], -1)
        if truths.shape[1] != draws.shape[2]:
            raise ShapeError(op, draws.shape, truths.shape, detail="truths must be (J, d)")
    return draws


def rmse(draws: np.ndarray, truths: np.ndarray) -> float:
    """``mean_j sqrt(mean_s mean_d (theta_s - theta*)^2)``.

    Raises:
        ValueError: If there are no draws
        ShapeError: If shapes are inconsistent
    """
    draws = _check_draws("rmse", draws, truths)
    truths = np.asarray(truths, dtype=np.float64).reshape(draws.shape[0], 1, draws.shape[2])
    per_dataset = np.sqrt(np.mean((draws - truths) ** 2, axis=(1, 2)))
    return float(per_dataset.mean())


def sbc_ece_per_dimension(draws: np.ndarray, truths: np.ndarray,
                          quantiles: Sequence[float] = SBC_QUANTILES) -> np.ndarray:
    """Per-parameter calibration error in percent.

    For every quantile ``q`` the central ``q`` credible interval of each
    dataset's draws (linear interpolation between order statistics) is
    checked for the ground truth; the error ``|coverage - q|`` is reduced by
    the median over quantiles.
    """
    draws = _check_draws("sbc_ece", draws, truths)
    truths = np.asarray(truths, dtype=np.float64).reshape(draws.shape[0], draws.shape[2])
    errors = []
    for q in quantiles:
        lower = np.quantile(draws, (1.0 - q) / 2.0, axis=1)
        upper = np.quantile(draws, (1.0 + q) / 2.0, axis=1)
        coverage = np.mean((truths >= lower) & (truths <= upper), axis=0)
        errors.append(np.abs(coverage - q))
    return 100.0 * np.median(np.stack(errors), axis=0)


def sbc_ece(draws: np.ndarray, truths: np.ndarray, quantiles: Sequence[float] = SBC_QUANTILES) -> float:
    """Median coverage error over quantiles, averaged over dimensions, in percent."""
    return float(np.mean(sbc_ece_per_dimension(draws, truths, quantiles)))


def contraction_from_variance(posterior_variance: np.ndarray, prior_variance: np.ndarray) -> float:
    """``mean(1 - posterior_variance / prior_variance)`` over datasets and dimensions."""
    prior_variance = np.asarray(prior_variance, dtype=np.float64)
    if np.any(prior_variance <= 0):
        raise ValueError("contraction: prior variance must be positive")
    ratio = np.asarray(posterior_variance, dtype=np.float64) / prior_variance
    return float(np.mean(1.0 - ratio))


def contraction(draws: np.ndarray, prior_variance: np.ndarray) -> float:
    """Posterior contraction from draws (unbiased per-dataset variance)."""
    draws = _check_draws("contraction", draws)
    if draws.shape[1] < 2:
        raise ValueError("contraction: need at least two draws per dataset")
    prior_variance = np.broadcast_to(np.asarray(prior_variance, dtype=np.float64), (draws.shape[2],))
    return contraction_from_variance(draws.var(axis=1, ddof=1), prior_variance)


def _kernel_sum(a: np.ndarray, b: np.ndarray, bandwidth: float) -> float:
    total = 0.0
    scale = -0.5 / bandwidth ** 2
    for start in range(0, a.shape[0], MMD_CHUNK):
        block = cdist(a[start:start + MMD_CHUNK], b, metric="sqeuclidean")
        total += float(np.exp(scale * block).sum())
    return total


def median_bandwidth(a: np.ndarray, b: np.ndarray) -> float:
    """Median pairwise distance over the pooled sample (strided subsample for large sets)."""
    pooled = np.vstack([a, b])
    if pooled.shape[0] > MMD_BANDWIDTH_POINTS:
        stride = int(np.ceil(pooled.shape[0] / MMD_BANDWIDTH_POINTS))
        pooled = pooled[::stride]
    return float(np.median(pdist(pooled)))


def mmd(a: np.ndarray, b: np.ndarray, bandwidth: Optional[float] = None) -> float:
    """Gaussian-kernel MMD between two samples (V-statistic, square root returned).

    The bandwidth defaults to the median heuristic over ``a`` and ``b``
    pooled; a zero bandwidth (all points identical) gives 0.

    Raises:
        ValueError: If either sample has fewer than two points
        ShapeError: If the samples differ in dimension
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise ValueError("mmd: each sample needs at least two points")
    if a.shape[1] != b.shape[1]:
        raise ShapeError("mmd", a.shape, b.shape, detail="samples differ in dimension")
    if bandwidth is None:
        bandwidth = median_bandwidth(a, b)
    if bandwidth <= 0:
        return 0.0
    n, m = a.shape[0], b.shape[0]
    squared = (_kernel_sum(a, a, bandwidth) / (n * n) + _kernel_sum(b, b, bandwidth) / (m * m)
               - 2.0 * _kernel_sum(a, b, bandwidth) / (n * m))
    return float(np.sqrt(max(squared, 0.0)))


def mean_mmd(draws: np.ndarray, reference: np.ndarray, max_datasets: Optional[int] = None) -> float:
    """Mean MMD between per-dataset draw sets ``(J, S, d)`` and reference draws ``(J, S', d)``."""
    draws = _check_draws("mean_mmd", draws)
    reference = _check_draws("mean_mmd", reference)
    if draws.shape[0] != reference.shape[0]:
        raise ShapeError("mean_mmd", draws.shape, reference.shape, detail="dataset counts differ")
    count = draws.shape[0] if max_datasets is None else min(max_datasets, draws.shape[0])
    return float(np.mean([mmd(draws[j], reference[j]) for j in range(count)]))
