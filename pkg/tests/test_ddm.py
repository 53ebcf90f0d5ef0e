"""Tests for the drift-diffusion first-passage sampler."""

import math

import numpy as np
import pytest

from src.simulators import ddm_sample, ddm_sample_batch, wiener_upper_probability
from tests.fixtures import make_rng


def expected_decision_time(alpha: float, v: float) -> float:
    """Mean first-passage time for a walk started midway between the bounds."""
    return alpha / (2.0 * v) * math.tanh(alpha * v / 2.0)


class TestWienerProbability:
    """Closed-form absorption probability."""

    def test_zero_drift_is_start_point(self):
        assert wiener_upper_probability(1.5, 0.3, 0.0) == pytest.approx(0.3)

    def test_symmetry(self):
        up = wiener_upper_probability(1.2, 0.5, 0.8)
        down = wiener_upper_probability(1.2, 0.5, -0.8)
        assert up + down == pytest.approx(1.0)
        assert up > 0.5

    def test_known_value(self):
        expected = (1.0 - math.exp(-2.0 * 1.0 * 1.0 * 0.5)) / (1.0 - math.exp(-2.0 * 1.0 * 1.0))
        assert wiener_upper_probability(1.0, 0.5, 1.0) == pytest.approx(expected)


class TestDdmSampler:
    """Reaction times, argument checks and the resampling cap."""

    def test_reaction_time_exceeds_non_decision_time(self):
        trial = ddm_sample(1.0, 0.4, 1.0, 0.5, 0.01, make_rng(0))
        assert trial.rt > 0.4
        assert isinstance(trial.upper, bool)

    def test_batch_shapes_and_signed(self):
        batch = ddm_sample_batch(1.0, 0.2, np.array([2.0, -2.0, 0.5]), 0.5, 0.01, make_rng(1))
        assert batch.rt.shape == (3,)
        signed = batch.signed()
        np.testing.assert_array_equal(np.sign(signed), np.where(batch.upper, 1.0, -1.0))

    def test_same_rng_same_trials(self):
        v = np.linspace(-1.0, 1.0, 10)
        a = ddm_sample_batch(1.0, 0.2, v, 0.5, 0.01, make_rng(2))
        b = ddm_sample_batch(1.0, 0.2, v, 0.5, 0.01, make_rng(2))
        np.testing.assert_array_equal(a.rt, b.rt)
        np.testing.assert_array_equal(a.upper, b.upper)

    @pytest.mark.parametrize("kwargs, message", [
        ({"alpha": 0.0}, "separation"),
        ({"beta": 1.0}, "starting point"),
        ({"tau": -0.1}, "non-decision"),
        ({"step": 0.0}, "Euler step"),
    ])
    def test_invalid_arguments(self, kwargs, message):
        args = {"alpha": 1.0, "tau": 0.2, "v": np.array([1.0]), "beta": 0.5, "step": 0.01}
        args.update(kwargs)
        with pytest.raises(ValueError, match=message):
            ddm_sample_batch(args["alpha"], args["tau"], args["v"], args["beta"], args["step"], make_rng(0))

    def test_capped_walks_are_resampled(self):
        batch = ddm_sample_batch(4.0, 0.0, np.zeros(50), 0.5, 0.01, make_rng(3), max_time=1.0)
        assert batch.resampled > 0
        assert np.all(batch.rt <= 1.0 + 1e-9)

    def test_exhausted_resampling_raises(self):
        with pytest.raises(RuntimeError, match="exceeded"):
            ddm_sample_batch(50.0, 0.0, np.zeros(5), 0.5, 0.01, make_rng(4), max_time=0.05)


@pytest.mark.slow
class TestDdmAccuracy:
    """Monte Carlo agreement with closed-form first-passage results at the production step."""

    @pytest.mark.parametrize("alpha, beta, v", [
        (1.0, 0.5, 0.5),
        (1.5, 0.3, 1.0),
        (2.0, 0.6, -0.5),
        (0.8, 0.5, 2.0),
        (1.2, 0.7, 0.0),
    ])
    def test_upper_probability_within_three_standard_errors(self, alpha, beta, v):
        trials = 10_000
        batch = ddm_sample_batch(alpha, 0.0, np.full(trials, v), beta, 1e-3, make_rng(10))
        expected = wiener_upper_probability(alpha, beta, v)
        se = math.sqrt(expected * (1.0 - expected) / trials)
        assert abs(batch.upper.mean() - expected) <= 3 * se

    def test_mean_decision_time(self):
        alpha, v = 1.5, 1.0
        batch = ddm_sample_batch(alpha, 0.3, np.full(10_000, v), 0.5, 1e-3, make_rng(11))
        assert (batch.rt - 0.3).mean() == pytest.approx(expected_decision_time(alpha, v), rel=0.03)

    def test_halving_the_step_changes_mean_rt_below_one_percent(self):
        alpha, beta, v, tau = 1.0, 0.5, 1.5, 1.0
        coarse = ddm_sample_batch(alpha, tau, np.full(50_000, v), beta, 1e-3, make_rng(12))
        fine = ddm_sample_batch(alpha, tau, np.full(50_000, v), beta, 5e-4, make_rng(13))
        assert abs(fine.rt.mean() - coarse.rt.mean()) / coarse.rt.mean() < 0.01
