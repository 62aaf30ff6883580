# -*- coding: utf-8 -*-
"""Тесты схем весов, групповых весов и эффективного размера выборки"""

import numpy as np
import pytest

from afr.errors import InvalidInputError
from afr.models.dataset import RW
from afr.utils.trainer import predict_probs
from afr.utils.weights import (
    AFR_EXPONENTIAL, CLASS_BALANCED, FOCAL, JTT_BINARY, ORACLE_GROUP_BALANCED, POWER, SCHEME_KINDS,
    WeightScheme, compute_weights, correct_class_probs, effective_sample_size, group_aggregated_weights,
    weight_sweep_table,
)


def random_inputs(rng, size=None):
    size = size or int(rng.integers(2, 40))
    p_hat = rng.uniform(0.01, 0.99, size=size)
    labels = rng.integers(0, 3, size=size)
    groups = labels * 2 + rng.integers(0, 2, size=size)
    correct = rng.uniform(size=size) < p_hat
    return p_hat, labels, groups, correct


def rw_inputs(dataset, head):
    rw = dataset.subset(RW)
    p_hat = correct_class_probs(predict_probs(head, rw.features), rw.labels)
    return p_hat, rw.labels, rw.groups


def reference_class_multiplier_weights(p_hat, labels, gamma):
    """
    Веса exp(−γ p̂), у классов кроме первого умноженные на count[первый] / count[y],
    затем одна нормировка на сумму
    """
    weights = np.exp(-gamma * np.asarray(p_hat))
    present = np.unique(labels)
    first_count = np.sum(labels == present[0])
    for label in present[1:]:
        weights[labels == label] *= first_count / np.sum(labels == label)
    return weights / weights.sum()


class TestCorrectClassProbs:

    def test_gather(self):
        assert correct_class_probs([[0.9, 0.1]], [0]).tolist() == [0.9]
        assert correct_class_probs([[0.9, 0.1]], [1]).tolist() == [0.1]

    def test_matches_loop(self):
        rng = np.random.default_rng(0)
        probs = rng.dirichlet(np.ones(4), size=30)
        labels = rng.integers(0, 4, size=30)
        expected = [probs[i, labels[i]] for i in range(30)]
        np.testing.assert_array_equal(correct_class_probs(probs, labels), expected)

    def test_label_out_of_range(self):
        with pytest.raises(InvalidInputError):
            correct_class_probs([[0.5, 0.5]], [2])

    def test_rows_must_sum_to_one(self):
        with pytest.raises(InvalidInputError):
            correct_class_probs([[0.5, 0.6]], [0])


class TestComputeWeights:

    def test_gamma_zero_class_balance(self):
        mu = compute_weights(WeightScheme(AFR_EXPONENTIAL, gamma=0.0), [0.3, 0.6, 0.9, 0.2], [0, 0, 0, 1])
        np.testing.assert_allclose(mu, [1 / 6, 1 / 6, 1 / 6, 1 / 2], atol=1e-15)

    def test_single_class_direct_evaluation(self):
        mu = compute_weights(WeightScheme(AFR_EXPONENTIAL, gamma=1.0), [0.9, 0.5], [0, 0])
        np.testing.assert_allclose(mu, [0.4013, 0.5987], atol=1e-4)

    def test_oracle_balanced(self):
        mu = compute_weights(WeightScheme(ORACLE_GROUP_BALANCED), [0.5, 0.5, 0.5, 0.5], [0, 0, 1, 1],
                             groups=[0, 0, 1, 1])
        np.testing.assert_allclose(mu, 0.25, atol=1e-15)

    def test_oracle_balances_groups(self):
        groups = np.array([0, 0, 0, 1, 2, 2, 3, 3, 3, 3])
        mu = compute_weights(WeightScheme(ORACLE_GROUP_BALANCED), np.full(10, 0.5), groups // 2, groups=groups)
        np.testing.assert_allclose(group_aggregated_weights(mu, groups, 4), 0.25, atol=1e-12)

    def test_jtt_upweights_errors(self):
        mu = compute_weights(WeightScheme(JTT_BINARY, upweight_lambda=5.0), [0.9, 0.2, 0.8], [0, 0, 1],
                             correct=[True, False, True])
        np.testing.assert_allclose(mu, [1 / 7, 5 / 7, 1 / 7], atol=1e-12)

    def test_focal_and_power_forms(self):
        p_hat = np.array([0.2, 0.7, 0.4])
        labels = np.array([0, 0, 0])
        focal = compute_weights(WeightScheme(FOCAL, gamma=2.0), p_hat, labels)
        power = compute_weights(WeightScheme(POWER, gamma=2.0), p_hat, labels)
        expected_focal = (1 - p_hat) ** 2
        expected_power = p_hat ** -2.0
        np.testing.assert_allclose(focal, expected_focal / expected_focal.sum(), rtol=1e-12)
        np.testing.assert_allclose(power, expected_power / expected_power.sum(), rtol=1e-12)

    def test_class_balanced_equals_gamma_zero(self):
        rng = np.random.default_rng(3)
        p_hat, labels, _, _ = random_inputs(rng, 50)
        balanced = compute_weights(WeightScheme(CLASS_BALANCED), p_hat, labels)
        gamma_zero = compute_weights(WeightScheme(AFR_EXPONENTIAL, gamma=0.0), p_hat, labels)
        assert np.max(np.abs(balanced - gamma_zero)) <= 1e-15

    @pytest.mark.parametrize('kind', SCHEME_KINDS)
    def test_normalized_and_non_negative(self, kind):
        rng = np.random.default_rng(SCHEME_KINDS.index(kind))
        for _ in range(200):
            p_hat, labels, groups, correct = random_inputs(rng)
            scheme = WeightScheme(kind, gamma=float(rng.uniform(0, 20)), upweight_lambda=float(rng.uniform(1, 50)))
            mu = compute_weights(scheme, p_hat, labels, correct=correct, groups=groups)
            assert np.all(mu >= 0)
            assert abs(mu.sum() - 1.0) < 1e-12

    def test_monotone_within_class(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            p_hat = rng.uniform(0.01, 0.99, size=int(rng.integers(2, 20)))
            labels = np.zeros(p_hat.size, dtype=int)
            mu = compute_weights(WeightScheme(AFR_EXPONENTIAL, gamma=float(rng.uniform(0.1, 10))), p_hat, labels)
            order = np.argsort(p_hat)
            assert np.all(np.diff(mu[order]) < 0)

    def test_shift_invariance(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            p_hat, labels, _, _ = random_inputs(rng)
            p_hat = p_hat * 0.5
            gamma = float(rng.uniform(0, 10))
            shifted = p_hat + float(rng.uniform(0, 0.4))
            scheme = WeightScheme(AFR_EXPONENTIAL, gamma=gamma)
            diff = compute_weights(scheme, p_hat, labels) - compute_weights(scheme, shifted, labels)
            assert np.max(np.abs(diff)) < 1e-12

    def test_matches_first_class_multiplier(self):
        rng = np.random.default_rng(6)
        for _ in range(1000):
            p_hat, labels, _, _ = random_inputs(rng)
            gamma = float(rng.uniform(0, 10))
            mu = compute_weights(WeightScheme(AFR_EXPONENTIAL, gamma=gamma), p_hat, labels)
            np.testing.assert_allclose(mu, reference_class_multiplier_weights(p_hat, labels, gamma), rtol=0, atol=1e-15)

    def test_large_gamma_stays_finite(self):
        mu = compute_weights(WeightScheme(AFR_EXPONENTIAL, gamma=5000.0), [0.99, 0.01, 0.5], [0, 1, 1])
        assert np.all(np.isfinite(mu))
        assert abs(mu.sum() - 1.0) < 1e-12

    @pytest.mark.parametrize('p_hat', [[0.0, 0.5], [0.5, 1.0], [np.nan, 0.5]])
    def test_p_hat_outside_open_interval(self, p_hat):
        with pytest.raises(InvalidInputError):
            compute_weights(WeightScheme(AFR_EXPONENTIAL, gamma=1.0), p_hat, [0, 1])

    def test_missing_side_inputs(self):
        with pytest.raises(InvalidInputError):
            compute_weights(WeightScheme(JTT_BINARY), [0.5, 0.5], [0, 1])
        with pytest.raises(InvalidInputError):
            compute_weights(WeightScheme(ORACLE_GROUP_BALANCED), [0.5, 0.5], [0, 1])

    def test_bad_scheme(self):
        with pytest.raises(InvalidInputError):
            WeightScheme('uniform')
        with pytest.raises(InvalidInputError):
            WeightScheme(AFR_EXPONENTIAL, gamma=-1.0)


class TestGroupAggregation:

    def test_uniform_over_groups(self):
        aggregated = group_aggregated_weights(np.full(4, 0.25), [0, 1, 1, 1])
        np.testing.assert_allclose(aggregated, [0.25, 0.75], atol=1e-15)

    def test_one_hot(self):
        aggregated = group_aggregated_weights([0.0, 1.0, 0.0], [0, 2, 1], n_groups=4)
        np.testing.assert_array_equal(aggregated, [0.0, 0.0, 1.0, 0.0])

    def test_minority_gains_weight(self, small_embeddings):
        dataset, head = small_embeddings
        table = weight_sweep_table(*rw_inputs(dataset, head), gammas=[0.0, 4.0], n_groups=4)
        aggregated = table['aggregated']
        np.testing.assert_allclose(aggregated.sum(axis=1), 1.0, atol=1e-12)
        minority = [1, 2]
        assert np.all(aggregated[1, minority] > aggregated[0, minority])


class TestEffectiveSampleSize:

    def test_uniform(self):
        assert effective_sample_size(np.full(10, 0.1)) == pytest.approx(10.0, abs=1e-12)

    def test_one_hot(self):
        assert effective_sample_size([0.0, 1.0, 0.0]) == 1.0

    def test_direct_value(self):
        assert effective_sample_size([0.5, 0.25, 0.25]) == pytest.approx(1 / 0.375, abs=1e-12)

    def test_bounded_by_size(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            p_hat, labels, _, _ = random_inputs(rng)
            mu = compute_weights(WeightScheme(AFR_EXPONENTIAL, gamma=float(rng.uniform(0, 10))), p_hat, labels)
            assert 1.0 - 1e-9 <= effective_sample_size(mu) <= mu.size + 1e-9

    def test_non_increasing_in_gamma_without_class_balance(self):
        rng = np.random.default_rng(8)
        gammas = np.linspace(0, 20, 21)
        for _ in range(100):
            p_hat = rng.uniform(0.01, 0.99, size=30)
            labels = np.zeros(30, dtype=int)
            table = weight_sweep_table(p_hat, labels, labels, gammas)
            assert np.all(np.diff(table['n_eff']) <= 1e-9)
