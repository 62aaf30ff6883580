# -*- coding: utf-8 -*-
"""
Численные примитивы: устойчивый softmax, log-sum-exp, обрезка градиента
и воспроизводимый генератор случайных чисел.
Все вычисления в float64, матрицы хранятся построчно (C order).
"""

from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from afr.errors import InvalidInputError


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """
    Приведение входа к двумерной float64 матрице в C-порядке.

    Args:
        values: Массив или вложенный список
        name (str): Имя аргумента для сообщения об ошибке

    Returns:
        np.ndarray: Матрица формы (rows, cols)
    """
    matrix = np.ascontiguousarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {matrix.shape}")
    return matrix


def ensure_finite(values: np.ndarray, name: str = "values") -> np.ndarray:
    """Проверка отсутствия NaN/Inf"""
    if not np.all(np.isfinite(values)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return values


def log_softmax_rows(logits) -> np.ndarray:
    """Построчный log-softmax со сдвигом на log-sum-exp"""
    logits = ensure_finite(as_matrix(logits, "logits"), "logits")
    return logits - logsumexp(logits, axis=1, keepdims=True)


def softmax_rows(logits) -> np.ndarray:
    """
    Построчный softmax.

    Args:
        logits: Матрица (N, C) конечных значений

    Returns:
        np.ndarray: Матрица вероятностей, строки суммируются в 1
    """
    return np.exp(log_softmax_rows(logits))


def log_sum_exp(values: Sequence[float]) -> float:
    """
    log Σ exp(v) со сдвигом на максимум.

    Args:
        values: Непустой вектор конечных значений

    Returns:
        float: Значение логарифма суммы экспонент
    """
    vector = np.asarray(values, dtype=np.float64).ravel()
    if vector.size == 0:
        raise InvalidInputError("log_sum_exp of an empty vector")
    ensure_finite(vector, "values")
    if vector.size == 1:
        return float(vector[0])
    return float(logsumexp(vector))


def clip_gradient_norm(gradient, max_norm: float) -> np.ndarray:
    """
    Обрезка L2-нормы градиента.

    Args:
        gradient: Плоский вектор параметров
        max_norm (float): Максимальная норма (> 0)

    Returns:
        np.ndarray: Исходный вектор, если норма не превышает max_norm, иначе масштабированный
    """
    if max_norm <= 0:
        raise InvalidInputError(f"max_norm must be positive, got {max_norm}")
    gradient = np.asarray(gradient, dtype=np.float64)
    norm = float(np.linalg.norm(gradient))
    if norm <= max_norm:
        return gradient
    return gradient * (max_norm / norm)


class Rng:
    """
    Воспроизводимый генератор на базе PCG64.
    Один и тот же seed даёт одну и ту же последовательность на любой платформе;
    глобальное состояние numpy не используется.
    """

    def __init__(self, seed: int):
        if seed < 0 or seed >= 2 ** 64:
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self):
        return f'<Rng seed={self.seed}>'

    def spawn(self, key: int) -> 'Rng':
        """Дочерний генератор, зависящий только от seed и ключа"""
        child_seed = np.random.SeedSequence([self.seed, int(key)]).generate_state(1, dtype=np.uint64)[0]
        return Rng(int(child_seed))

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    def choice(self, n: int, size: int) -> np.ndarray:
        """Выбор size индексов из range(n) без возвращения"""
        return self._generator.choice(n, size=size, replace=False)

    def normal(self, size, scale: float = 1.0) -> np.ndarray:
        return self._generator.normal(0.0, scale, size=size)


