# -*- coding: utf-8 -*-
"""
Веса примеров для второй стадии.

Основная схема: μᵢ ∝ β_{yᵢ} exp(−γ p̂ᵢ), где p̂ᵢ: вероятность верного класса
по модели первой стадии, β_y = 1 / (число примеров класса y в переданном наборе).
Все схемы нормируются в лог-пространстве и суммируются в 1.
Веса вычисляются один раз и не зависят от состояния второй стадии.
"""

from dataclasses import dataclass, asdict
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from afr.errors import InvalidInputError

AFR_EXPONENTIAL = 'afr_exponential'
FOCAL = 'focal'
POWER = 'power'
CLASS_BALANCED = 'class_balanced'
JTT_BINARY = 'jtt_binary'
ORACLE_GROUP_BALANCED = 'oracle_group_balanced'

SCHEME_KINDS = (AFR_EXPONENTIAL, FOCAL, POWER, CLASS_BALANCED, JTT_BINARY, ORACLE_GROUP_BALANCED)

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class WeightScheme:
    """
    Функциональная форма весов.

    Attributes:
        kind: Одна из SCHEME_KINDS
        gamma: γ ≥ 0 (не используется для class_balanced и oracle_group_balanced)
        upweight_lambda: Множитель для ошибочно классифицированных (только jtt_binary)
    """

    kind: str = AFR_EXPONENTIAL
    gamma: float = 0.0
    upweight_lambda: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise InvalidInputError(f"unknown weight scheme '{self.kind}', expected one of {SCHEME_KINDS}")
        if not self.gamma >= 0:
            raise InvalidInputError(f"gamma must be non-negative, got {self.gamma}")
        if not self.upweight_lambda > 0:
            raise InvalidInputError(f"upweight_lambda must be positive, got {self.upweight_lambda}")

    def to_dict(self) -> Dict:
        return asdict(self)


def correct_class_probs(probs, labels) -> np.ndarray:
    """
    p̂ᵢ = probs[i, yᵢ].

    Args:
        probs: Матрица вероятностей (N, C), строки суммируются в 1
        labels: Метки классов

    Returns:
        np.ndarray: Вектор вероятностей верного класса; насыщенные значения
        сдвинуты внутрь [PROB_CLAMP, 1 − PROB_CLAMP]
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise InvalidInputError(f"shape mismatch: probs {probs.shape}, labels {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise InvalidInputError(f"label index out of range [0, {probs.shape[1]})")
    if probs.size and np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-9:
        raise InvalidInputError("probability rows must sum to 1")
    return np.clip(probs[np.arange(labels.size), labels], PROB_CLAMP, 1.0 - PROB_CLAMP)


def class_log_balance(labels: np.ndarray, n_classes: Optional[int] = None) -> np.ndarray:
    """log β_{yᵢ} = −log(число примеров класса yᵢ)"""
    counts = np.bincount(labels, minlength=n_classes or 0)
    return -np.log(counts[labels].astype(np.float64))


def _log_factor(scheme: WeightScheme, p_hat: np.ndarray) -> np.ndarray:
    """Логарифм множителя, зависящего от p̂"""
    if scheme.kind == AFR_EXPONENTIAL:
        return -scheme.gamma * p_hat
    clamped = np.clip(p_hat, PROB_CLAMP, 1.0 - PROB_CLAMP)
    if scheme.kind == FOCAL:
        return scheme.gamma * np.log1p(-clamped)
    if scheme.kind == POWER:
        return -scheme.gamma * np.log(clamped)
    return np.zeros_like(p_hat)


def normalize_log_weights(log_weights: np.ndarray) -> np.ndarray:
    """exp(log w − logsumexp(log w)): нормировка без переполнений"""
    return np.exp(log_weights - logsumexp(log_weights))


def compute_weights(scheme: WeightScheme,
                    p_hat,
                    labels,
                    correct=None,
                    groups=None) -> np.ndarray:
    """
    Веса μ для переобучения последнего слоя.

    Args:
        scheme (WeightScheme): Функциональная форма
        p_hat: Вероятности верного класса p̂ᵢ ∈ (0, 1)
        labels: Метки классов (β_y считается по ним)
        correct: Булев вектор верных предсказаний первой стадии (нужен для jtt_binary)
        groups: Метки групп (нужны для oracle_group_balanced)

    Returns:
        np.ndarray: Неотрицательные веса, сумма равна 1
    """
    p_hat = np.asarray(p_hat, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if p_hat.ndim != 1 or labels.shape != p_hat.shape:
        raise InvalidInputError(f"shape mismatch: p_hat {p_hat.shape}, labels {labels.shape}")
    if p_hat.size == 0:
        raise InvalidInputError("cannot compute weights for an empty set")
    if np.any(~np.isfinite(p_hat)) or np.any(p_hat <= 0) or np.any(p_hat >= 1):
        raise InvalidInputError("p_hat values must lie strictly inside (0, 1)")

    if scheme.kind == JTT_BINARY:
        if correct is None:
            raise InvalidInputError("jtt_binary weights require the correctness vector")
        correct = np.asarray(correct, dtype=bool)
        if correct.shape != p_hat.shape:
            raise InvalidInputError("correctness vector length mismatch")
        log_weights = np.where(correct, 0.0, np.log(scheme.upweight_lambda))
    elif scheme.kind == ORACLE_GROUP_BALANCED:
        if groups is None:
            raise InvalidInputError("oracle_group_balanced weights require group labels")
        groups = np.asarray(groups, dtype=np.int64)
        if groups.shape != p_hat.shape:
            raise InvalidInputError("group vector length mismatch")
        log_weights = -np.log(np.bincount(groups)[groups].astype(np.float64))
    else:
        log_weights = class_log_balance(labels) + _log_factor(scheme, p_hat)

    return normalize_log_weights(log_weights)


def group_aggregated_weights(mu, groups, n_groups: Optional[int] = None) -> np.ndarray:
    """
    Суммарный вес каждой группы Σ_{i: gᵢ = g} μᵢ.

    Args:
        mu: Нормированные веса
        groups: Метки групп
        n_groups (int): Число групп G (по умолчанию max(groups) + 1)

    Returns:
        np.ndarray: Вектор длины G
    """
    mu = np.asarray(mu, dtype=np.float64)
    groups = np.asarray(groups, dtype=np.int64)
    if groups.shape != mu.shape:
        raise InvalidInputError(f"shape mismatch: mu {mu.shape}, groups {groups.shape}")
    return np.bincount(groups, weights=mu, minlength=n_groups or 0)


def effective_sample_size(mu) -> float:
    """N_eff = 1 / Σ μᵢ² для нормированных весов"""
    mu = np.asarray(mu, dtype=np.float64)
    return float(1.0 / np.sum(mu ** 2))


def weight_sweep_table(p_hat, labels, groups, gammas: Sequence[float],
                       kind: str = AFR_EXPONENTIAL, n_groups: Optional[int] = None) -> Dict[str, np.ndarray]:
    """
    Групповые веса и N_eff как функция γ (данные для графиков).

    Returns:
        dict: gammas (K,), aggregated (K, G), n_eff (K,)
    """
    aggregated, n_eff = [], []
    for gamma in gammas:
        mu = compute_weights(WeightScheme(kind=kind, gamma=float(gamma)), p_hat, labels)
        aggregated.append(group_aggregated_weights(mu, groups, n_groups))
        n_eff.append(effective_sample_size(mu))
    return {
        'gammas': np.asarray(gammas, dtype=np.float64),
        'aggregated': np.vstack(aggregated),
        'n_eff': np.asarray(n_eff),
    }
