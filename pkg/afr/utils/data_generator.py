# -*- coding: utf-8 -*-
"""
Генерация синтетических данных со спурийной корреляцией и разбиение на сплиты.
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np

from afr.errors import InvalidInputError
from afr.models.dataset import ERM, RW, TEST, VAL, EmbeddingDataset, SyntheticSpec
from afr.utils.numerics import Rng

logger = logging.getLogger(__name__)

N_ATTRIBUTES = 2


def largest_remainder_counts(total: int, fractions: Sequence[float]) -> np.ndarray:
    """
    Целочисленное распределение total по долям методом наибольшего остатка.

    Args:
        total (int): Сколько элементов распределить
        fractions: Неотрицательные доли (нормируются на сумму)

    Returns:
        np.ndarray: Счётчики, сумма равна total, каждый в пределах 1 от точной доли
    """
    fractions = np.asarray(fractions, dtype=np.float64)
    exact = total * fractions / fractions.sum()
    counts = np.floor(exact).astype(np.int64)
    remainder = total - int(counts.sum())
    if remainder > 0:
        # при равных остатках побеждает меньший индекс
        order = np.argsort(-(exact - counts), kind='stable')
        counts[order[:remainder]] += 1
    return counts


def generate_synthetic(spec: SyntheticSpec) -> EmbeddingDataset:
    """
    Синтетический набор с четырьмя группами и двумя классами.

    Координата 0 несёт core-признак (знак задаётся классом, модуль core_separation),
    координата 1 несёт спурийный признак (знак задаётся атрибутом, модуль spurious_separation),
    остальные dims - 2 координаты содержат чистый шум. Все примеры помечены как ERM;
    сплиты назначает split().

    Args:
        spec (SyntheticSpec): Параметры генератора

    Returns:
        EmbeddingDataset: N = n_total примеров, C = 2, G = 4
    """
    problems = spec.validate()
    if problems:
        field, message = problems[0]
        raise InvalidInputError(f"invalid synthetic spec: {field}: {message}")

    counts = largest_remainder_counts(spec.n_total, spec.group_proportions)
    if np.any(counts < 1):
        raise InvalidInputError(
            f"invalid synthetic spec: n_total={spec.n_total} leaves a group empty (counts {counts.tolist()})"
        )

    rng = Rng(spec.seed)
    groups = np.repeat(np.arange(len(counts)), counts)
    labels = groups // N_ATTRIBUTES
    attributes = groups % N_ATTRIBUTES

    means = np.zeros((spec.n_total, spec.dims))
    means[:, 0] = np.where(labels == 1, spec.core_separation, -spec.core_separation)
    means[:, 1] = np.where(attributes == 1, spec.spurious_separation, -spec.spurious_separation)
    features = means + rng.normal((spec.n_total, spec.dims), scale=spec.noise_std)

    order = rng.permutation(spec.n_total)
    logger.info(f"✅ Generated synthetic dataset: {spec.n_total} rows, group counts {counts.tolist()}")
    return EmbeddingDataset(
        features=features[order],
        labels=labels[order],
        split_tags=np.full(spec.n_total, ERM),
        groups=groups[order],
        n_classes=2,
        n_groups=len(counts),
        n_attributes=N_ATTRIBUTES,
    )


def _check_fraction(name: str, value: float):
    if not 0 < value < 1:
        raise InvalidInputError(f"{name} must lie in (0, 1), got {value}")


def _allocate_stratum(size: int, fractions: np.ndarray) -> np.ndarray:
    """Счётчики (VAL, TEST, ERM, RW) для одного страта"""
    counts = largest_remainder_counts(size, fractions)
    if size >= len(fractions):
        # каждый сплит получает хотя бы один пример
        while np.any(counts == 0):
            counts[int(np.argmax(counts))] -= 1
            counts[int(np.argmin(counts))] += 1
    return counts


def split(dataset: EmbeddingDataset,
          erm_fraction: float,
          val_fraction: float,
          test_fraction: float,
          rng: Rng,
          stratify: bool = True) -> EmbeddingDataset:
    """
    Назначение тегов ERM/RW/VAL/TEST.

    Сначала отделяются VAL и TEST, оставшаяся обучающая часть делится
    ERM : RW как erm_fraction : (1 - erm_fraction).

    Args:
        dataset (EmbeddingDataset): Исходный набор
        erm_fraction (float): Доля ERM внутри обучающей части
        val_fraction (float): Доля валидации от всего набора
        test_fraction (float): Доля теста от всего набора
        rng (Rng): Генератор для перемешивания
        stratify (bool): Стратифицировать по группам (или по классам, если групп нет)

    Returns:
        EmbeddingDataset: Тот же набор с новыми тегами сплитов
    """
    for name, value in (('erm_fraction', erm_fraction),
                        ('val_fraction', val_fraction),
                        ('test_fraction', test_fraction)):
        _check_fraction(name, value)
    if val_fraction + test_fraction >= 1:
        raise InvalidInputError("val_fraction + test_fraction must leave a training portion")

    train_fraction = 1.0 - val_fraction - test_fraction
    fractions = np.array([
        val_fraction,
        test_fraction,
        train_fraction * erm_fraction,
        train_fraction * (1.0 - erm_fraction),
    ])
    codes = np.array([VAL, TEST, ERM, RW])

    if stratify:
        strata = dataset.groups if dataset.has_groups else dataset.labels
    else:
        strata = np.zeros(dataset.n_rows, dtype=np.int64)

    tags = np.empty(dataset.n_rows, dtype=np.int64)
    for stratum in np.unique(strata):
        members = np.flatnonzero(strata == stratum)
        members = members[rng.permutation(members.size)]
        counts = _allocate_stratum(members.size, fractions)
        tags[members] = np.repeat(codes, counts)

    result = dataset.with_split_tags(tags)
    logger.info(f"📊 Split counts: {result.split_counts()}")
    return result


def subsample_validation(dataset: EmbeddingDataset, fraction: float, rng: Rng) -> EmbeddingDataset:
    """
    Оставить долю fraction валидационных строк (⌈fraction·N_val⌉, без возвращения).
    Остальные сплиты не меняются.

    Args:
        dataset (EmbeddingDataset): Набор с VAL-сплитом
        fraction (float): Доля в (0, 1]
        rng (Rng): Генератор выборки

    Returns:
        EmbeddingDataset: Набор с уменьшенной валидацией
    """
    if not 0 < fraction <= 1:
        raise InvalidInputError(f"fraction must lie in (0, 1], got {fraction}")
    val_rows = dataset.split_indices(VAL)
    keep = math.ceil(fraction * val_rows.size - 1e-9)
    if keep == 0:
        raise InvalidInputError("validation subsample is empty")
    if keep == val_rows.size:
        return dataset

    chosen = np.sort(val_rows[rng.choice(val_rows.size, keep)])
    other_rows = np.flatnonzero(dataset.split_tags != VAL)
    rows = np.sort(np.concatenate([other_rows, chosen]))
    logger.debug(f"Validation subsample: kept {keep} of {val_rows.size} rows")
    return dataset.take(rows)


def group_balanced_subset(dataset: EmbeddingDataset, split_name, rng: Rng,
                          per_group: Optional[int] = None) -> EmbeddingDataset:
    """
    Подвыборка с равным числом примеров каждой группы из одного сплита.

    Args:
        dataset (EmbeddingDataset): Набор с метками групп
        split_name: Сплит, из которого берутся строки
        rng (Rng): Генератор выборки
        per_group (int): Размер на группу (по умолчанию размер наименьшей группы)

    Returns:
        EmbeddingDataset: Только выбранные строки
    """
    groups = dataset.require_groups()
    rows = dataset.split_indices(split_name)
    present = [g for g in range(dataset.n_groups) if np.any(groups[rows] == g)]
    if not present:
        raise InvalidInputError(f"split {split_name} has no rows")
    sizes = [int(np.sum(groups[rows] == g)) for g in present]
    take = min(sizes) if per_group is None else min(per_group, min(sizes))

    chosen = []
    for g in present:
        members = rows[groups[rows] == g]
        chosen.append(members[rng.choice(members.size, take)])
    return dataset.take(np.sort(np.concatenate(chosen)))


__all__ = [
    'N_ATTRIBUTES',
    'largest_remainder_counts',
    'generate_synthetic',
    'split',
    'subsample_validation',
    'group_balanced_subset',
]
