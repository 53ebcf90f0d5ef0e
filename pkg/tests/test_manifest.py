"""Tests for the run manifest."""

import json

import pytest

from src.core.errors import ArtifactError
from src.harness.manifest import EVALUATED, FAILED, MANIFEST_NAME, TRAINED, RunEntry, RunManifest, run_key


class TestRunEntry:

    def test_key_and_defaults(self):
        entry = RunEntry("late", 3)
        assert entry.key == run_key("late", 3) == "late/3"
        assert entry.status == "pending"
        assert not entry.trained

    def test_unknown_status(self):
        with pytest.raises(ValueError, match="Unknown run status"):
            RunEntry("late", 0, status="done")

    def test_trained_statuses(self):
        assert RunEntry("late", 0, status=TRAINED).trained
        assert RunEntry("late", 0, status=EVALUATED).trained
        assert not RunEntry("late", 0, status=FAILED).trained


class TestRunManifest:
    """Persistence and config-hash handling."""

    def test_every_update_is_persisted(self, tmp_path):
        manifest = RunManifest.open(tmp_path, "abc")
        manifest.update("late", 0, status=TRAINED, checkpoint="c.npz", steps=10)
        with open(tmp_path / MANIFEST_NAME) as f:
            payload = json.load(f)
        assert payload["config_hash"] == "abc"
        assert payload["runs"]["late/0"]["status"] == TRAINED
        assert payload["runs"]["late/0"]["steps"] == 10

    def test_dataset_diagnostics_are_persisted(self, tmp_path):
        manifest = RunManifest.open(tmp_path, "abc")
        manifest.record_dataset("train", {"split": "train", "resampled": 4})
        assert RunManifest.open(tmp_path, "abc").datasets == {"train": {"split": "train", "resampled": 4}}
        assert RunManifest.open(tmp_path, "xyz").datasets == {}

    def test_reopen_keeps_entries(self, tmp_path):
        RunManifest.open(tmp_path, "abc").update("hybrid", 1, status=EVALUATED)
        reopened = RunManifest.open(tmp_path, "abc")
        assert reopened.get("hybrid", 1).status == EVALUATED
        assert reopened.get("hybrid", 2) is None

    def test_changed_hash_starts_fresh(self, tmp_path):
        """A different config discards the previous run book."""
        RunManifest.open(tmp_path, "abc").update("late", 0, status=TRAINED)
        fresh = RunManifest.open(tmp_path, "xyz")
        assert fresh.entries == {}
        assert fresh.config_hash == "xyz"

    def test_saving_twice_gives_identical_bytes(self, tmp_path):
        manifest = RunManifest.open(tmp_path, "abc")
        manifest.update("late", 0, status=TRAINED)
        first = (tmp_path / MANIFEST_NAME).read_bytes()
        manifest.save()
        assert (tmp_path / MANIFEST_NAME).read_bytes() == first

    def test_with_status_sorted(self, tmp_path):
        manifest = RunManifest.open(tmp_path, "abc")
        manifest.update("late", 1, status=EVALUATED)
        manifest.update("hybrid", 0, status=FAILED, error={"message": "diverged"})
        manifest.update("early-X", 0, status=EVALUATED)
        assert [e.key for e in manifest.with_status(EVALUATED)] == ["early-X/0", "late/1"]
        assert manifest.with_status(FAILED)[0].error == {"message": "diverged"}

    def test_update_rejects_unknown_field(self, tmp_path):
        manifest = RunManifest.open(tmp_path, "abc")
        with pytest.raises(AttributeError):
            manifest.update("late", 0, loss=1.0)

    def test_update_rejects_unknown_status(self, tmp_path):
        manifest = RunManifest.open(tmp_path, "abc")
        with pytest.raises(ValueError):
            manifest.update("late", 0, status="halfway")

    def test_load_ignores_hash(self, tmp_path):
        RunManifest.open(tmp_path, "abc").update("late", 0, status=TRAINED)
        assert RunManifest.load(tmp_path).config_hash == "abc"

    def test_load_missing(self, tmp_path):
        with pytest.raises(ArtifactError, match="manifest"):
            RunManifest.load(tmp_path)
