"""Tests for the missing-data encoding, fusion strategies and summary networks."""

import numpy as np
import pytest

from src.core.errors import ShapeError
from src.diffcore import Graph, ParameterStore, backward, mul, reduce_sum
from src.fusion import (
    MISSING_FILL,
    MissingnessMask,
    SourceSpec,
    Strategy,
    SummarySpec,
    apply_missingness,
    attention_presence,
    build_summary_network,
    network_count,
    source_specs,
)
from tests.fixtures import make_exp1_batch, make_rng, make_two_set_batch, tiny_spec

EMBED_DIM = 4


def _encoded_exp1(count: int = 3):
    data = make_exp1_batch(count)
    return apply_missingness(data, MissingnessMask.all_present(data))


def _network(architecture, data, kinds=("set", "series"), condition_dim: int = 0):
    spec = SummarySpec(
        architecture=architecture,
        sources=source_specs(data, kinds),
        embed_dim=EMBED_DIM,
        embedder_blocks=1,
        embed_attention=tiny_spec(),
        fusion_attention=tiny_spec(layer_norm=False),
        condition_dim=condition_dim,
    )
    network = build_summary_network(spec)
    store = ParameterStore()
    network.init_params(store, make_rng(0))
    return network, store


class TestMissingnessEncoding:
    """Fill constant and appended presence columns."""

    def test_missing_rows_filled_and_flagged(self):
        data = make_two_set_batch(count=2, rows=3, dim=2)
        masks = [np.array([[True, False, True], [True, True, True]]), np.ones((2, 3), dtype=bool)]
        encoded = apply_missingness(data, MissingnessMask(masks))
        x = encoded.sources[0].values
        assert x.shape == (2, 3, 3)
        np.testing.assert_array_equal(x[0, 1], [MISSING_FILL, MISSING_FILL, 0.0])
        np.testing.assert_array_equal(x[0, 0, :2], data.sources[0].values[0, 0])
        assert x[0, 0, 2] == 1.0
        np.testing.assert_array_equal(encoded.sources[0].presence, masks[0])

    def test_missing_fraction(self):
        mask = MissingnessMask([np.array([[True, False]]), np.array([[False, False]])])
        assert mask.missing_fraction() == pytest.approx(0.75)

    def test_mask_shape_checked(self):
        data = make_two_set_batch(count=2, rows=3)
        with pytest.raises(ShapeError):
            apply_missingness(data, MissingnessMask([np.ones((2, 4)), np.ones((2, 3))]))

    def test_fully_missing_source_attends_over_all_rows(self):
        presence = np.array([[False, False], [True, False]])
        np.testing.assert_array_equal(attention_presence(presence), [[True, True], [True, False]])


class TestSummaryNetworks:
    """Embedding widths and behaviour per architecture."""

    @pytest.mark.parametrize("architecture, width", [
        ("only-X", EMBED_DIM),
        ("only-Y", EMBED_DIM),
        ("early-X", EMBED_DIM),
        ("early-Y", EMBED_DIM),
        ("late", 2 * EMBED_DIM),
        ("hybrid", 2 * EMBED_DIM),
    ])
    def test_embedding_width(self, architecture, width):
        data = _encoded_exp1()
        network, store = _network(architecture, data)
        out = network.embed(data, store)
        assert network.output_dim == width
        assert out.shape == (3, width)
        assert np.all(np.isfinite(out))

    def test_direct_concat_width(self):
        raw = make_two_set_batch(count=3, rows=5, dim=2)
        data = apply_missingness(raw, MissingnessMask.all_present(raw))
        network, store = _network("direct-concat", data, kinds=("set", "set"))
        assert network.embed(data, store).shape == (3, 2 * EMBED_DIM)
        assert network.network_names == ["concat"]

    def test_direct_concat_rejects_unequal_rows(self):
        sources = [SourceSpec("x", "set", 3, rows=5), SourceSpec("y", "set", 3, rows=4)]
        with pytest.raises(ShapeError, match="direct-concat"):
            SummarySpec(architecture="direct-concat", sources=sources)

    def test_single_source_network_ignores_other_source(self):
        data = _encoded_exp1()
        network, store = _network("only-X", data)
        before = network.embed(data, store)
        data.sources[1].values[:] = make_rng(9).normal(size=data.sources[1].values.shape)
        np.testing.assert_array_equal(network.embed(data, store), before)

    def test_hybrid_uses_both_cross_blocks(self):
        network, _ = _network("hybrid", _encoded_exp1())
        assert network.network_names == ["x", "y", "to_x", "to_y"]

    def test_direct_conditions_appended(self):
        data = _encoded_exp1()
        data.conditions = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        network, store = _network("late", data, condition_dim=2)
        out = network.embed(data, store)
        assert out.shape == (3, 2 * EMBED_DIM + 2)
        np.testing.assert_array_equal(out[:, -2:], data.conditions)

    def test_missing_conditions_rejected(self):
        data = _encoded_exp1()
        network, store = _network("late", data, condition_dim=2)
        with pytest.raises(ShapeError, match="direct conditions"):
            network.embed(data, store)

    def test_feature_dim_checked(self):
        data = _encoded_exp1()
        network, store = _network("late", data)
        raw = make_exp1_batch(3)
        with pytest.raises(ShapeError, match="feature dim"):
            network.embed(raw, store)

    @pytest.mark.parametrize("architecture", ["late", "early-X", "hybrid"])
    def test_fully_missing_source_is_finite_and_differentiable(self, architecture):
        raw = make_exp1_batch(2)
        masks = MissingnessMask.all_present(raw)
        masks.masks[1][0] = False
        data = apply_missingness(raw, masks)
        network, store = _network(architecture, data)

        g = Graph(store)
        out = network(g, data)
        assert np.all(np.isfinite(out.numpy()))
        grads = backward(g, reduce_sum(mul(out, out)))
        assert all(np.all(np.isfinite(v)) for v in grads.values())

    def test_network_prefixes_are_disjoint(self):
        network, store = _network("hybrid", _encoded_exp1())
        prefixes = {name.split(".")[0] for name in store}
        assert prefixes == {"embed_x", "embed_y", "cross_to_x", "cross_to_y"}


class TestStrategies:
    """Architecture names and network counts."""

    def test_parse_accepts_aliases(self):
        assert Strategy.parse("Early-to-X") is Strategy.EARLY_TO_X
        assert Strategy.parse("LATE") is Strategy.LATE
        with pytest.raises(ValueError, match="Unknown architecture"):
            Strategy.parse("middle")

    @pytest.mark.parametrize("strategy, sources, expected", [
        ("late", 2, 2),
        ("early-X", 2, 2),
        ("hybrid", 2, 4),
        ("late", 3, 3),
        ("early-Y", 3, 4),
        ("hybrid", 3, 9),
    ])
    def test_network_count(self, strategy, sources, expected):
        assert network_count(strategy, sources) == expected

    def test_network_count_rejects_single_source(self):
        with pytest.raises(ValueError):
            network_count("late", 1)
        with pytest.raises(ValueError, match="not a multi-network"):
            network_count("only-X", 2)

    def test_two_source_strategies_need_two_sources(self):
        with pytest.raises(ValueError, match="exactly two sources"):
            SummarySpec(architecture="hybrid", sources=[SourceSpec("x", "set", 2)])
