"""Shared pytest fixtures."""

import logging

import pytest

from src.diffcore.layers import ParameterStore
from tests.fixtures import make_exp1_batch, make_rng, tiny_experiment_config, tiny_spec


@pytest.fixture
def rng():
    """Seeded RNG (seed 42)."""
    return make_rng(42)


@pytest.fixture
def store():
    return ParameterStore()


@pytest.fixture
def spec():
    return tiny_spec()


@pytest.fixture
def exp1_batch():
    return make_exp1_batch()


@pytest.fixture
def exp1_config(tmp_path):
    return tiny_experiment_config(tmp_path / "exp1")


@pytest.fixture
def exp2_config(tmp_path):
    return tiny_experiment_config(tmp_path / "exp2", experiment="exp2")


@pytest.fixture(autouse=True)
def _reset_package_logger():
    """Undo CLI telemetry configuration between tests."""
    yield
    logger = logging.getLogger("src")
    logger.handlers.clear()
    logger.propagate = True
    logger.setLevel(logging.NOTSET)
