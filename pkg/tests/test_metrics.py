"""Tests for posterior quality metrics."""

import numpy as np
import pytest

from src.core.errors import ShapeError
from src.metrics import (
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
from tests.fixtures import make_rng


def calibrated_suite(datasets: int, draws: int, dim: int, seed: int = 0, spread: float = 1.0):
    """Ground truths and draws from the exact posterior N(m_j, 1) (scaled by ``spread``)."""
    rng = make_rng(seed)
    centres = rng.normal(0.0, 3.0, size=(datasets, dim))
    truths = centres + rng.normal(size=(datasets, dim))
    samples = centres[:, None, :] + spread * rng.normal(size=(datasets, draws, dim))
    return samples, truths


class TestRmse:
    """Root mean squared error against ground truths."""

    def test_constant_offset(self):
        truths = np.zeros((4, 3))
        draws = np.ones((4, 10, 3))
        assert rmse(draws, truths) == pytest.approx(1.0)

    def test_mean_over_datasets(self):
        truths = np.zeros((2, 1))
        draws = np.stack([np.full((5, 1), 1.0), np.full((5, 1), 3.0)])
        assert rmse(draws, truths) == pytest.approx(2.0)

    def test_two_dimensional_draws_are_univariate(self):
        assert rmse(np.full((3, 4), 2.0), np.zeros(3)) == pytest.approx(2.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError, match="truths"):
            rmse(np.zeros((2, 5, 3)), np.zeros((2, 2)))

    def test_no_draws(self):
        with pytest.raises(ValueError, match="at least one"):
            rmse(np.zeros((2, 0, 3)), np.zeros((2, 3)))


class TestCalibration:
    """Simulation-based calibration error."""

    def test_overconfident_posterior_is_miscalibrated(self):
        draws, truths = calibrated_suite(2000, 200, 2, spread=0.3)
        assert sbc_ece(draws, truths) > 20.0

    def test_per_dimension_shape(self):
        draws, truths = calibrated_suite(100, 50, 3)
        per_dim = sbc_ece_per_dimension(draws, truths)
        assert per_dim.shape == (3,)
        assert sbc_ece(draws, truths) == pytest.approx(float(per_dim.mean()))
        assert np.all((per_dim >= 0) & (per_dim <= 100))

    def test_quantile_grid(self):
        assert len(SBC_QUANTILES) == 20
        assert SBC_QUANTILES[0] == pytest.approx(0.005)
        assert SBC_QUANTILES[-1] == pytest.approx(0.995)

    def test_truth_outside_every_interval(self):
        draws = make_rng(1).normal(size=(50, 100, 1))
        truths = np.full((50, 1), 100.0)
        expected = 100.0 * np.median(SBC_QUANTILES)
        assert sbc_ece(draws, truths) == pytest.approx(expected)

    @pytest.mark.slow
    def test_exact_posterior_is_calibrated(self):
        draws, truths = calibrated_suite(20000, 500, 1, seed=5)
        assert sbc_ece(draws, truths) < 1.0


class TestContraction:
    """Posterior contraction relative to the prior."""

    def test_from_variance(self):
        assert contraction_from_variance(np.array([0.25, 0.5]), np.array([1.0, 1.0])) == pytest.approx(0.625)

    def test_from_draws(self):
        draws, _ = calibrated_suite(200, 400, 2, spread=0.5)
        assert contraction(draws, 1.0) == pytest.approx(0.75, abs=0.02)

    def test_per_dimension_prior(self):
        draws = make_rng(2).normal(size=(100, 500, 2)) * np.array([1.0, 2.0])
        assert contraction(draws, np.array([4.0, 4.0])) == pytest.approx(0.5 * (0.75 + 0.0), abs=0.03)

    def test_wider_than_prior_is_negative(self):
        draws = 3.0 * make_rng(3).normal(size=(20, 200, 1))
        assert contraction(draws, 1.0) < 0.0

    def test_needs_two_draws(self):
        with pytest.raises(ValueError, match="two draws"):
            contraction(np.zeros((3, 1, 2)), 1.0)

    def test_prior_variance_positive(self):
        with pytest.raises(ValueError, match="positive"):
            contraction_from_variance(np.ones(2), np.array([1.0, 0.0]))


class TestMmd:
    """Kernel two-sample distance."""

    def test_same_sample_is_zero(self):
        a = make_rng(0).normal(size=(200, 2))
        assert mmd(a, a) == pytest.approx(0.0, abs=1e-7)

    def test_symmetric(self):
        rng = make_rng(1)
        a, b = rng.normal(size=(150, 2)), rng.normal(0.5, 1.0, size=(120, 2))
        assert mmd(a, b) == pytest.approx(mmd(b, a))

    def test_shift_increases_distance(self):
        rng = make_rng(2)
        reference = rng.normal(size=(400, 2))
        near = rng.normal(size=(400, 2))
        far = rng.normal(1.5, 1.0, size=(400, 2))
        assert mmd(far, reference) > 3 * mmd(near, reference)

    def test_fixed_bandwidth(self):
        a = np.array([[0.0], [0.0]])
        b = np.array([[1.0], [1.0]])
        expected = np.sqrt(2.0 - 2.0 * np.exp(-0.5))
        assert mmd(a, b, bandwidth=1.0) == pytest.approx(expected)

    def test_identical_points_give_zero(self):
        a = np.ones((5, 2))
        assert mmd(a, a) == 0.0
        assert median_bandwidth(a, a) == 0.0

    def test_argument_checks(self):
        with pytest.raises(ValueError, match="two points"):
            mmd(np.zeros((1, 2)), np.zeros((5, 2)))
        with pytest.raises(ShapeError, match="dimension"):
            mmd(np.zeros((3, 2)), np.zeros((3, 1)))

    def test_mean_over_datasets(self):
        rng = make_rng(3)
        draws = rng.normal(size=(4, 60, 2))
        reference = rng.normal(size=(4, 80, 2))
        expected = np.mean([mmd(draws[j], reference[j]) for j in range(4)])
        assert mean_mmd(draws, reference) == pytest.approx(expected)
        assert mean_mmd(draws, reference, max_datasets=2) == pytest.approx(
            np.mean([mmd(draws[j], reference[j]) for j in range(2)]))

    def test_mean_dataset_counts_must_match(self):
        with pytest.raises(ShapeError, match="dataset counts"):
            mean_mmd(np.zeros((3, 4, 1)), np.zeros((2, 4, 1)))
