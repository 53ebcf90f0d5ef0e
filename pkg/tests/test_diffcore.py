"""Tests for the autodiff engine, layers and optimizer.

Gradients of every primitive and of three randomized composite networks are
checked against central finite differences.
"""

import numpy as np
import pytest

from src.core.errors import NonFiniteError, ShapeError
from src.diffcore import (
    AdamState,
    Dense,
    FeedForward,
    Graph,
    ParameterStore,
    adam_step,
    add,
    affine,
    backward,
    concat,
    cosine_learning_rate,
    dropout,
    exp,
    gradient_check,
    l2_penalty,
    layer_norm,
    log,
    matmul,
    mul,
    reduce_mean,
    reduce_sum,
    relu,
    softmax,
    split,
    tanh,
)
from src.embeddings.set_embedder import SetEmbedder
from src.embeddings.temporal_embedder import TemporalEmbedder
from src.flow.coupling import CouplingFlow
from tests.fixtures import make_rng, tiny_spec

TOLERANCE = 1e-4


def weighted_sum(t):
    """Scalar with distinct weights per element so no gradient cancels."""
    w = np.linspace(0.5, 1.5, t.size).reshape(t.shape)
    return reduce_sum(mul(t, w))


def randomize(store: ParameterStore, seed: int = 0, scale: float = 0.3) -> ParameterStore:
    rng = make_rng(seed)
    for name in list(store):
        store.set(name, rng.normal(0.0, scale, size=store[name].shape))
    return store


def away_from_zero(x: np.ndarray, gap: float = 0.2) -> np.ndarray:
    return x + np.sign(x) * gap


class TestPrimitiveGradients:
    """Finite-difference checks of each primitive."""

    def _check(self, values, fn):
        store = ParameterStore(values)
        worst, per_param = gradient_check(fn, store)
        assert worst <= TOLERANCE, per_param

    def test_matmul_batched(self):
        rng = make_rng(1)
        self._check({"a": rng.normal(size=(2, 3, 4)), "b": rng.normal(size=(4, 5))},
                    lambda g: weighted_sum(matmul(g.param("a"), g.param("b"))))

    def test_matmul_transposed(self):
        rng = make_rng(2)
        self._check({"a": rng.normal(size=(2, 3, 4)), "b": rng.normal(size=(2, 5, 4))},
                    lambda g: weighted_sum(matmul(g.param("a"), g.param("b"), transpose_b=True)))

    def test_add_and_mul_broadcast(self):
        rng = make_rng(3)
        self._check({"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(4,))},
                    lambda g: weighted_sum(mul(add(g.param("a"), g.param("b")), g.param("b"))))

    def test_concat_and_split(self):
        rng = make_rng(4)

        def fn(g):
            joined = concat([g.param("a"), g.param("b")], axis=-1)
            first, second = split(joined, [3, 2], axis=-1)
            return reduce_sum(mul(weighted_sum(first), weighted_sum(tanh(second))))

        self._check({"a": rng.normal(size=(2, 2)), "b": rng.normal(size=(2, 3))}, fn)

    def test_masked_softmax(self):
        rng = make_rng(5)
        mask = np.array([[True, True, False, True], [True, False, True, True]])
        self._check({"a": rng.normal(size=(2, 4))}, lambda g: weighted_sum(softmax(g.param("a"), mask)))

    def test_layer_norm(self):
        rng = make_rng(6)
        self._check({"x": rng.normal(size=(3, 5)), "gain": rng.normal(size=5), "bias": rng.normal(size=5)},
                    lambda g: weighted_sum(layer_norm(g.param("x"), g.param("gain"), g.param("bias"))))

    def test_elementwise_nonlinearities(self):
        rng = make_rng(7)
        x = away_from_zero(rng.normal(size=(3, 4)))

        def fn(g):
            v = g.param("x")
            total = add(weighted_sum(relu(v)), weighted_sum(tanh(v)))
            total = add(total, weighted_sum(exp(affine(v, 0.5))))
            return add(total, weighted_sum(log(mul(v, v))))

        self._check({"x": x}, fn)

    def test_reductions_and_affine(self):
        rng = make_rng(8)

        def fn(g):
            y = affine(g.param("x"), g.param("scale"), g.param("shift"))
            return add(weighted_sum(reduce_sum(y, axis=1)), weighted_sum(reduce_mean(y, axis=0, keepdims=True)))

        self._check({"x": rng.normal(size=(3, 4)), "scale": rng.normal(size=(4,)), "shift": rng.normal(size=(3, 1))},
                    fn)

    def test_dropout_is_identity_in_evaluation(self):
        rng = make_rng(9)
        self._check({"x": rng.normal(size=(3, 4))}, lambda g: weighted_sum(dropout(g.param("x"), 0.5)))


class TestCompositeGradients:
    """Gradient checks over whole randomized networks."""

    def test_set_embedder(self):
        embedder = SetEmbedder("set", 3, 2, tiny_spec(), blocks=1)
        store = ParameterStore()
        embedder.init_params(store, make_rng(0))
        randomize(store, 10)
        x = make_rng(11).normal(size=(2, 4, 3))
        presence = np.array([[True, True, False, True], [True, True, True, True]])
        worst, per_param = gradient_check(lambda g: weighted_sum(embedder(g, g.constant(x), presence)), store)
        assert worst <= TOLERANCE, per_param

    def test_temporal_embedder(self):
        embedder = TemporalEmbedder("series", 2, 3, tiny_spec(), blocks=1)
        store = ParameterStore()
        embedder.init_params(store, make_rng(1))
        randomize(store, 12)
        y = make_rng(13).normal(size=(2, 5, 2))
        times = np.linspace(0.0, 2.0, 5)
        worst, per_param = gradient_check(lambda g: weighted_sum(embedder(g, g.constant(y), None, times)), store)
        assert worst <= TOLERANCE, per_param

    def test_conditional_flow_log_prob(self):
        flow = CouplingFlow(dim=3, cond_dim=2, blocks=3, hidden=(6,))
        store = ParameterStore()
        flow.init_params(store, make_rng(2))
        randomize(store, 14, scale=0.2)
        rng = make_rng(15)
        theta, cond = rng.normal(size=(4, 3)), rng.normal(size=(4, 2))
        worst, per_param = gradient_check(
            lambda g: reduce_mean(flow.log_prob(g, g.constant(theta), g.constant(cond))), store)
        assert worst <= TOLERANCE, per_param


class TestBackward:
    """Tape semantics and error handling."""

    def test_reused_node_accumulates(self):
        g = Graph(ParameterStore({"x": np.array([[1.5, -2.0]])}))
        x = g.param("x")
        grads = backward(g, reduce_sum(mul(x, x)))
        np.testing.assert_allclose(grads["x"], [[3.0, -4.0]])

    def test_unused_parameter_gets_zero_gradient(self):
        g = Graph(ParameterStore({"x": np.ones((2,)), "y": np.ones((3,))}))
        g.param("y")
        grads = backward(g, reduce_sum(g.param("x")))
        np.testing.assert_array_equal(grads["y"], np.zeros(3))

    def test_non_scalar_output_rejected(self):
        g = Graph(ParameterStore({"x": np.ones((2,))}))
        with pytest.raises(ShapeError):
            backward(g, g.param("x"))

    def test_matmul_shape_mismatch(self):
        g = Graph()
        with pytest.raises(ShapeError, match="matmul"):
            matmul(g.constant(np.ones((2, 3))), g.constant(np.ones((4, 2))))

    def test_non_finite_output_raises(self):
        g = Graph()
        with pytest.raises(NonFiniteError, match="log"):
            log(g.constant(np.array([[-1.0]])))

    def test_fully_masked_softmax_row(self):
        g = Graph()
        with pytest.raises(ValueError, match="fully masked"):
            softmax(g.constant(np.zeros((2, 3))), np.array([[True, False, False], [False, False, False]]))

    def test_training_graph_needs_rng(self):
        with pytest.raises(ValueError):
            Graph(training=True)


class TestLayersAndOptimizer:
    """Dense/FeedForward layers, L2 penalty, Adam and the LR schedule."""

    def test_zero_output_feedforward_returns_zeros(self):
        ffn = FeedForward("ffn", 3, (5,), 2, zero_output=True)
        store = ParameterStore()
        ffn.init_params(store, make_rng(0))
        g = Graph(store)
        out = ffn(g, g.constant(make_rng(1).normal(size=(4, 3))))
        np.testing.assert_array_equal(out.numpy(), np.zeros((4, 2)))

    def test_l2_penalty_covers_kernels_only(self):
        layer = Dense("d", 2, 2)
        store = ParameterStore()
        layer.init_params(store, make_rng(0))
        store.set("d.bias", np.array([5.0, 5.0]))
        g = Graph(store)
        layer(g, g.constant(np.ones((1, 2))))
        penalty = l2_penalty(g, 0.5)
        assert penalty.item() == pytest.approx(0.5 * float(np.sum(store["d.kernel"] ** 2)))

    def test_l2_penalty_disabled_by_zero_weight(self):
        g = Graph(ParameterStore({"w.kernel": np.ones((2, 2))}))
        g.param("w.kernel")
        assert l2_penalty(g, 0.0) is None

    def test_adam_first_step_moves_by_learning_rate(self):
        store = ParameterStore({"w": np.array([1.0, -2.0, 3.0])})
        state = AdamState.fresh(store)
        adam_step(store, {"w": np.array([0.5, -4.0, 2.0])}, state, lr=0.01)
        np.testing.assert_allclose(store["w"], [0.99, -1.99, 2.99], atol=1e-7)
        assert state.step == 1

    def test_adam_rejects_non_finite_gradient(self):
        store = ParameterStore({"w": np.zeros(2)})
        state = AdamState.fresh(store)
        with pytest.raises(NonFiniteError, match="'w'"):
            adam_step(store, {"w": np.array([np.nan, 0.0])}, state, lr=0.1)
        np.testing.assert_array_equal(store["w"], np.zeros(2))

    def test_adam_minimises_quadratic(self):
        store = ParameterStore({"w": np.array([3.0, -2.0])})
        state = AdamState.fresh(store)
        for step in range(500):
            g = Graph(store)
            w = g.param("w")
            grads = backward(g, reduce_sum(mul(w, w)))
            adam_step(store, grads, state, lr=cosine_learning_rate(step, 500, 0.1))
        assert np.all(np.abs(store["w"]) < 0.05)

    def test_cosine_schedule_endpoints(self):
        assert cosine_learning_rate(0, 100, 1e-3) == pytest.approx(1e-3)
        assert cosine_learning_rate(99, 100, 1e-3) == pytest.approx(0.0, abs=1e-18)
        assert cosine_learning_rate(49.5, 100, 1e-3) == pytest.approx(5e-4)
        values = [cosine_learning_rate(s, 50, 1.0) for s in range(50)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_snapshot_is_independent(self):
        store = ParameterStore({"w": np.zeros(2)})
        copy = store.snapshot()
        store.set("w", np.ones(2))
        np.testing.assert_array_equal(copy["w"], np.zeros(2))
