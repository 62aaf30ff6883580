# -*- coding: utf-8 -*-
"""Тесты полносвязной сети, Adam, экстрактора первой стадии и балансирующей сети"""

import numpy as np
import pytest

from afr.errors import DivergenceError, InvalidInputError
from afr.models.dataset import ERM
from afr.models.mlp import AdamState, BalanceConfig, ExtractorConfig, Mlp
from afr.utils.backprop import (
    adam_step, balance_inputs, balance_loss, balance_loss_and_gradient, cache_embeddings,
    cross_entropy_and_gradient, train_balance_learner, train_erm_extractor,
)
from afr.utils.file_io import decode_mlp, encode_mlp
from afr.utils.numerics import Rng, softmax_rows
from afr.utils.trainer import predict_probs


def central_difference(func, params, eps=1e-6):
    grad = np.zeros_like(params)
    for k in range(params.size):
        step = np.zeros_like(params)
        step[k] = eps
        grad[k] = (func(params + step) - func(params - step)) / (2 * eps)
    return grad


def relative_error(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))


@pytest.fixture
def separable_fixture():
    """Группа однозначно задаётся парой (p, y); размеры групп 30, 10, 10, 20"""
    rows = {0: ([0.9, 0.1], 0), 1: ([0.3, 0.7], 0), 2: ([0.2, 0.8], 1), 3: ([0.6, 0.4], 1)}
    counts = (30, 10, 10, 20)
    groups = np.repeat(np.arange(4), counts)
    probs = np.array([rows[g][0] for g in groups])
    labels = np.array([rows[g][1] for g in groups])
    return probs, labels, groups


class TestForward:

    def test_zero_weights_give_bias(self):
        mlp = Mlp((3, 4, 2), [np.zeros((4, 3)), np.zeros((2, 4))], [np.ones(4), np.array([0.5, -1.5])])
        outputs = mlp.forward(np.random.default_rng(0).normal(size=(6, 3)))
        weights_only = np.zeros((2, 4)) @ np.ones(4)
        np.testing.assert_array_equal(outputs, np.tile(weights_only + [0.5, -1.5], (6, 1)))

    def test_single_layer_is_linear(self):
        weights = np.random.default_rng(1).normal(size=(3, 3))
        mlp = Mlp((3, 3), [weights], [np.zeros(3)])
        inputs = np.random.default_rng(2).normal(size=(5, 3))
        np.testing.assert_allclose(mlp.forward(inputs), inputs @ weights.T, rtol=1e-15)

    def test_softplus_stays_positive(self):
        mlp = Mlp((1, 1), [np.ones((1, 1))], [np.zeros(1)], output_transform='softplus')
        outputs = mlp.forward([[-30.0], [-800.0], [0.0]])
        assert np.all(outputs > 0)
        assert outputs[0, 0] < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            Mlp.init((3, 2), Rng(0)).forward(np.zeros((2, 4)))

    def test_checkpoint_round_trip(self):
        mlp = Mlp.init((5, 7, 3), Rng(4))
        loaded = decode_mlp(encode_mlp(mlp))
        assert loaded.layer_sizes == mlp.layer_sizes
        np.testing.assert_array_equal(loaded.params(), mlp.params())


class TestBackprop:

    @pytest.mark.parametrize('seed', range(3))
    def test_cross_entropy_gradient(self, seed):
        rng = Rng(seed)
        mlp = Mlp.init((5, 4, 3, 3), rng)
        mlp = mlp.with_params(mlp.params() + rng.normal(mlp.params().size, scale=0.1))
        inputs = rng.normal((8, 5))
        labels = np.arange(8) % 3
        _, analytic = cross_entropy_and_gradient(mlp, inputs, labels)
        numeric = central_difference(lambda p: cross_entropy_and_gradient(mlp.with_params(p), inputs, labels)[0],
                                     mlp.params())
        assert relative_error(analytic, numeric) < 1e-4

    def test_softplus_output_gradient(self):
        rng = Rng(7)
        mlp = Mlp.init((4, 6, 2), rng, output_transform='softplus')
        inputs = rng.normal((8, 4))
        weights = rng.normal((8, 2))

        def loss(params):
            return float(np.sum(weights * mlp.with_params(params).forward(inputs)))

        _, activations, pre_activations = mlp.forward_cache(inputs)
        grad_w, grad_b = mlp.backward(weights, activations, pre_activations)
        analytic = mlp.flat_gradient(grad_w, grad_b)
        assert relative_error(analytic, central_difference(loss, mlp.params())) < 1e-4

    @pytest.mark.parametrize('seed', range(3))
    def test_balance_loss_gradient(self, seed):
        rng = Rng(100 + seed)
        probs = softmax_rows(rng.normal((8, 2)))
        labels = np.arange(8) % 2
        groups = np.arange(8) % 4
        inputs = balance_inputs(probs, labels)
        mlp = Mlp.init((4, 6, 5, 1), rng, output_transform='softplus')

        _, analytic, _ = balance_loss_and_gradient(mlp, inputs, groups, 4)
        numeric = central_difference(
            lambda p: balance_loss_and_gradient(mlp.with_params(p), inputs, groups, 4)[0], mlp.params())
        assert relative_error(analytic, numeric) < 1e-4


class TestAdam:

    def test_zero_gradient_keeps_params(self):
        state = AdamState(learning_rate=0.1)
        params = np.array([1.0, -2.0, 3.0])
        for _ in range(5):
            params_next = adam_step(state, params, np.zeros(3))
            np.testing.assert_array_equal(params_next, params)
        assert state.step == 5

    def test_first_step_moves_by_learning_rate(self):
        state = AdamState(learning_rate=0.01)
        moved = adam_step(state, np.zeros(3), np.array([2.0, -0.5, 1e-3]))
        np.testing.assert_allclose(moved, [-0.01, 0.01, -0.01], rtol=1e-4)
        assert state.first_moment.shape == (3,)

    def test_shape_mismatch(self):
        state = AdamState()
        adam_step(state, np.zeros(3), np.ones(3))
        with pytest.raises(InvalidInputError):
            adam_step(state, np.zeros(4), np.ones(4))


class TestErmExtractor:

    @pytest.fixture(scope='class')
    def trained(self, small_synthetic):
        config = ExtractorConfig(hidden=(8, 8), epochs=3, learning_rate=0.05, batch_size=32)
        return train_erm_extractor(small_synthetic, config, Rng(0)), config

    def test_shapes(self, trained, small_synthetic):
        result, config = trained
        assert result.extractor.layer_sizes == (small_synthetic.dim, 8, 8, 2)
        assert len(result.losses) == config.epochs
        assert 0.0 <= result.train_accuracy <= 1.0

    def test_head_is_last_layer_and_anchor(self, trained):
        result, _ = trained
        np.testing.assert_array_equal(result.head.weights, result.extractor.weights[-1])
        np.testing.assert_array_equal(result.head.anchor_bias, result.extractor.biases[-1])

    def test_deterministic(self, trained, small_synthetic):
        result, config = trained
        again = train_erm_extractor(small_synthetic, config, Rng(0))
        np.testing.assert_array_equal(again.extractor.params(), result.extractor.params())
        assert again.losses == result.losses

    def test_cached_embeddings(self, trained, small_synthetic):
        result, _ = trained
        cached = cache_embeddings(result.extractor, small_synthetic)
        assert cached.dim == 8
        np.testing.assert_array_equal(cached.labels, small_synthetic.labels)
        np.testing.assert_array_equal(cached.groups, small_synthetic.groups)
        np.testing.assert_array_equal(cached.split_tags, small_synthetic.split_tags)
        again = cache_embeddings(result.extractor, small_synthetic)
        assert again.features.tobytes() == cached.features.tobytes()

        from_head = predict_probs(result.head, cached.features)
        from_network = softmax_rows(result.extractor.forward(small_synthetic.features))
        assert np.max(np.abs(from_head - from_network)) < 1e-12

    def test_divergence(self, small_synthetic):
        exploding = small_synthetic.with_features(small_synthetic.features * 1e150)
        with pytest.raises(DivergenceError):
            train_erm_extractor(exploding, ExtractorConfig(hidden=(8, 8), epochs=2), Rng(0))

    def test_empty_erm_split(self, tiny_dataset):
        without_erm = tiny_dataset.take(np.flatnonzero(tiny_dataset.split_tags != ERM))
        with pytest.raises(InvalidInputError):
            train_erm_extractor(without_erm, ExtractorConfig(hidden=(4,), epochs=1), Rng(0))


class TestBalanceLearner:

    def test_loss_zero_when_balanced(self):
        assert balance_loss([0.25, 0.25, 0.25, 0.25]) == 0.0
        assert balance_loss([0.5, 0.5, 0.0, 0.0]) == pytest.approx(0.25)

    def test_constant_output_gives_population_shares(self, separable_fixture):
        probs, labels, groups = separable_fixture
        mlp = Mlp((4, 3, 1), [np.zeros((3, 4)), np.zeros((1, 3))], [np.zeros(3), np.zeros(1)], 'softplus')
        _, _, aggregated = balance_loss_and_gradient(mlp, balance_inputs(probs, labels), groups, 4)
        np.testing.assert_allclose(aggregated, np.array([30, 10, 10, 20]) / 70, atol=1e-12)

    def test_separable_fixture_balances(self, separable_fixture):
        probs, labels, groups = separable_fixture
        result = train_balance_learner(probs, labels, groups, 4, config=BalanceConfig(), rng=Rng(0))
        assert result.trajectory.shape == (2001, 4)
        np.testing.assert_allclose(result.trajectory.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(np.abs(result.trajectory[-1] - 0.25) < 0.05)
        assert np.all(result.trajectory > 0)
        assert result.losses[-1] < result.losses[0]

        weights = result.mlp.forward(balance_inputs(probs, labels))[:, 0]
        assert np.all(weights > 0)

    def test_trajectory_rows_normalized(self, separable_fixture):
        probs, labels, groups = separable_fixture
        result = train_balance_learner(probs, labels, groups, 4,
                                       config=BalanceConfig(hidden=(16, 16), steps=25), rng=Rng(1))
        assert result.trajectory.shape == (26, 4)
        assert len(result.losses) == 26
        assert np.all(result.trajectory > 0)
        np.testing.assert_allclose(result.trajectory.sum(axis=1), 1.0, atol=1e-9)

    def test_group_out_of_range(self, separable_fixture):
        probs, labels, groups = separable_fixture
        with pytest.raises(InvalidInputError):
            train_balance_learner(probs, labels, groups, 3, config=BalanceConfig(steps=1))
