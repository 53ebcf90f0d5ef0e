"""Tests for joint training, standardization and checkpoints."""

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.errors import ArtifactError, TrainingDivergedError
from src.core.events import EpochCompleted, EventBus, TrainingFinished, TrainingStarted
from src.core.rng import RNG
from src.core.storage import encode_json, write_npz
from src.diffcore import AdamState
from src.flow import (
    Checkpoint,
    CouplingFlow,
    Standardizer,
    TrainConfig,
    init_parameters,
    load_checkpoint,
    sample,
    save_checkpoint,
    train,
)
from src.fusion import SummarySpec, build_summary_network, source_specs
from src.simulators.exp1 import analytic_posterior_exp1
from tests.fixtures import make_exp1_batch, tiny_exp1_config, tiny_spec


def _models(data, architecture: str = "late"):
    spec = SummarySpec(architecture=architecture, sources=source_specs(data, ("set", "series")), embed_dim=4,
                       embedder_blocks=1, embed_attention=tiny_spec(), fusion_attention=tiny_spec())
    summary = build_summary_network(spec)
    flow = CouplingFlow(dim=data.theta.shape[1], cond_dim=summary.output_dim, blocks=2, hidden=(8,))
    return summary, flow


def _data(count: int = 64, seed: int = 0):
    return make_exp1_batch(count, seed=seed, config=tiny_exp1_config(dim=2, n_rows=3, n_steps=5))


class TestTrainConfig:
    """Optimisation settings and their derived quantities."""

    def test_default_steps(self):
        config = TrainConfig()
        assert config.steps_per_epoch() == 157
        assert config.epochs * config.steps_per_epoch() == 30 * 157
        assert config.validation_size == 500

    def test_budget_must_cover_batch(self):
        with pytest.raises(ValidationError, match="budget"):
            TrainConfig(budget=8, batch_size=16)

    def test_constant_schedule(self):
        config = TrainConfig(schedule="constant", learning_rate=0.01)
        assert config.learning_rate_at(500, 1000) == 0.01

    def test_cosine_schedule(self):
        config = TrainConfig(learning_rate=0.01)
        assert config.learning_rate_at(0, 10) == pytest.approx(0.01)
        assert config.learning_rate_at(9, 10) == pytest.approx(0.0, abs=1e-15)

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError):
            TrainConfig(momentum=0.9)


class TestTraining:
    """End-to-end optimisation on the conjugate model."""

    def test_loss_decreases(self):
        """Training and held-out losses both fall over the epochs."""
        data, validation = _data(), _data(64, seed=1)
        summary, flow = _models(data)
        config = TrainConfig(budget=64, epochs=6, batch_size=16, learning_rate=5e-3, schedule="constant",
                             l2_weight=0.0)
        result = train(summary, flow, data, config, validation=validation)
        assert result.steps == 6 * 4
        assert len(result.train_loss) == len(result.val_loss) == 6
        assert result.train_loss[-1] < result.train_loss[0]
        assert result.val_loss[-1] < result.val_loss[0]

    @pytest.mark.slow
    def test_posterior_mean_tracks_exact_posterior(self):
        """A trained late-fusion flow recovers most of the exact posterior mean."""
        config = tiny_exp1_config(dim=2, n_rows=3, n_steps=5)
        data = make_exp1_batch(1024, seed=0, config=config)
        test = make_exp1_batch(64, seed=1, config=config)
        summary, flow = _models(data)
        result = train(summary, flow, data, TrainConfig(budget=1024, epochs=30, batch_size=32,
                                                        learning_rate=3e-3, schedule="constant"))

        draws = sample(flow, result.params, summary.embed(test, result.params), 500, RNG(2))
        exact = analytic_posterior_exp1(test.sources[0].values, test.sources[1].values, config).mean
        flow_error = np.mean((draws.mean(axis=1) - exact) ** 2)
        prior_error = np.mean(exact ** 2)
        assert flow_error < 0.5 * prior_error

    def test_validation_loss_and_events(self):
        data, validation = _data(32), _data(8, seed=1)
        summary, flow = _models(data)
        bus = EventBus()
        seen = []
        for event_type in (TrainingStarted, EpochCompleted, TrainingFinished):
            bus.subscribe(event_type, seen.append)
        config = TrainConfig(budget=32, epochs=2, batch_size=16, learning_rate=1e-3)
        result = train(summary, flow, data, config, validation=validation, event_bus=bus, run_id="late/0")

        assert all(np.isfinite(result.val_loss))
        assert [type(e) for e in seen] == [TrainingStarted, EpochCompleted, EpochCompleted, TrainingFinished]
        assert seen[1].run_id == "late/0"
        assert seen[2].epoch == 2
        assert len(result.learning_rates) == result.steps == 4
        assert result.learning_rates[-1] == pytest.approx(0.0, abs=1e-15)

    def test_validation_loss_is_nan_without_validation_set(self):
        data = _data(16)
        summary, flow = _models(data)
        result = train(summary, flow, data, TrainConfig(budget=16, epochs=1, batch_size=16))
        assert np.isnan(result.val_loss[0])

    def test_same_seed_same_parameters(self):
        data = _data(32)
        config = TrainConfig(budget=32, epochs=2, batch_size=8, learning_rate=1e-3, seed=3)
        first = train(*_models(data), data, config)
        second = train(*_models(data), data, config)
        for name in first.params:
            np.testing.assert_array_equal(first.params[name], second.params[name])
        assert first.train_loss == second.train_loss

    def test_batch_transform_applied(self):
        data = _data(16)
        summary, flow = _models(data)
        calls = []

        def record(batch, rng):
            calls.append(batch.size)
            return batch

        train(summary, flow, data, TrainConfig(budget=16, epochs=2, batch_size=8), batch_transform=record)
        assert calls == [8, 8, 8, 8]

    def test_divergence_names_the_block(self):
        data = _data(16)
        summary, flow = _models(data)
        params = init_parameters(summary, flow, 0)
        name = "flow.block1.conditioner.out.kernel"
        params.set(name, np.full(params[name].shape, np.nan))
        with pytest.raises(TrainingDivergedError) as info:
            train(summary, flow, data, TrainConfig(budget=16, epochs=1, batch_size=8), params=params)
        assert info.value.epoch == 1
        assert info.value.batch == 0
        assert info.value.block == "flow.block1"
        assert info.value.to_dict()["error"] == "TrainingDivergedError"

    def test_training_needs_parameters(self):
        data = _data(8)
        data.theta = None
        summary, flow = _models(_data(8))
        with pytest.raises(ValueError, match="parameters"):
            train(summary, flow, data, TrainConfig(budget=8, epochs=1, batch_size=8))


class TestStandardizer:
    """z-scoring of parameters and present rows."""

    def test_fit_ignores_missing_rows(self):
        raw = _data(20)
        presence = np.ones((20, 3), dtype=bool)
        presence[:, 0] = False
        raw.sources[0].presence = presence
        raw.sources[0].values[:, 0] = 1e6
        standardizer = Standardizer.fit(raw, np.zeros(2), np.ones(2))
        assert np.all(np.abs(standardizer.source_mean[0]) < 10.0)

    def test_theta_round_trip(self):
        standardizer = Standardizer(np.array([1.0, -2.0]), np.array([0.5, 3.0]))
        theta = np.array([[0.3, 4.0], [2.0, -1.0]])
        np.testing.assert_allclose(standardizer.inverse_theta(standardizer.transform_theta(theta)), theta)

    def test_transformed_data_is_standardized(self):
        data = _data(200)
        standardizer = Standardizer.fit(data, np.zeros(2), np.ones(2))
        scaled = standardizer.transform_data(data)
        rows = scaled.sources[0].values.reshape(-1, 2)
        np.testing.assert_allclose(rows.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(rows.std(axis=0), 1.0, atol=1e-12)

    def test_source_count_checked(self):
        standardizer = Standardizer.fit(_data(4), np.zeros(2), np.ones(2))
        standardizer.source_mean.pop()
        with pytest.raises(ValueError, match="fitted on"):
            standardizer.transform_data(_data(4))


class TestCheckpoint:
    """Versioned checkpoint files."""

    def _checkpoint(self):
        data = _data(16)
        summary, flow = _models(data)
        result = train(summary, flow, data, TrainConfig(budget=16, epochs=1, batch_size=8))
        return Checkpoint(
            params=result.params,
            optimizer=result.optimizer,
            config={"architecture": "late", "seed": 0},
            rng_state=RNG(0).get_state(),
            standardizer=Standardizer.fit(data, np.zeros(2), np.ones(2)),
            extra={"train_loss": result.train_loss},
        )

    def test_round_trip_is_exact(self, tmp_path):
        original = self._checkpoint()
        path = save_checkpoint(tmp_path / "late_seed0.npz", original)
        restored = load_checkpoint(path)

        assert list(restored.params) == list(original.params)
        for name in original.params:
            np.testing.assert_array_equal(restored.params[name], original.params[name])
            np.testing.assert_array_equal(restored.optimizer.m[name], original.optimizer.m[name])
            np.testing.assert_array_equal(restored.optimizer.v[name], original.optimizer.v[name])
        assert restored.optimizer.step == original.optimizer.step
        assert restored.config == original.config
        assert restored.rng_state == original.rng_state
        assert restored.extra == original.extra
        np.testing.assert_array_equal(restored.standardizer.source_std[1], original.standardizer.source_std[1])

    def test_rng_state_restores_stream(self, tmp_path):
        rng = RNG(5)
        rng.normal(size=3)
        checkpoint = Checkpoint(params=self._checkpoint().params, rng_state=rng.get_state())
        restored = load_checkpoint(save_checkpoint(tmp_path / "c.npz", checkpoint))
        clone = RNG(5)
        clone.set_state(restored.rng_state)
        np.testing.assert_array_equal(clone.normal(size=4), rng.normal(size=4))

    def test_identical_content_identical_bytes(self, tmp_path):
        checkpoint = self._checkpoint()
        a = save_checkpoint(tmp_path / "a.npz", checkpoint)
        b = save_checkpoint(tmp_path / "b.npz", checkpoint)
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_version_rejected(self, tmp_path):
        path = write_npz(tmp_path / "old.npz", {"format_version": np.array(99), "meta": encode_json({})})
        with pytest.raises(ArtifactError, match="format_version 99"):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactError) as info:
            load_checkpoint(tmp_path / "absent.npz")
        assert isinstance(info.value, FileNotFoundError)

    def test_optimizer_is_optional(self, tmp_path):
        params = self._checkpoint().params
        restored = load_checkpoint(save_checkpoint(tmp_path / "p.npz", Checkpoint(params=params)))
        assert restored.optimizer is None
        assert restored.standardizer is None
        assert isinstance(AdamState.fresh(restored.params), AdamState)
