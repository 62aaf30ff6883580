# -*- coding: utf-8 -*-
"""
Метрики групповой устойчивости: точность по группам, worst-group accuracy (WGA)
и средняя точность, взвешенная по распространённости групп.
"""

from typing import Optional

import numpy as np

from afr.errors import InvalidInputError, MissingGroupsError
from afr.models.report import GroupDiagnostics


def predict_labels(predictions) -> np.ndarray:
    """
    Предсказанные классы: argmax по строке (ничьи к меньшему индексу)
    или сам вектор, если переданы метки.
    """
    predictions = np.asarray(predictions)
    if predictions.ndim == 2:
        return np.argmax(predictions, axis=1)
    if predictions.ndim == 1:
        return predictions.astype(np.int64)
    raise InvalidInputError(f"predictions must be a vector of labels or an N×C matrix, got shape {predictions.shape}")


def per_group_accuracy(predicted, labels, groups, n_groups: int) -> np.ndarray:
    """Точность по группам; NaN для групп без примеров"""
    correct = (np.asarray(predicted) == np.asarray(labels)).astype(np.float64)
    groups = np.asarray(groups, dtype=np.int64)
    totals = np.bincount(groups, minlength=n_groups).astype(np.float64)
    hits = np.bincount(groups, weights=correct, minlength=n_groups)
    with np.errstate(invalid='ignore', divide='ignore'):
        return np.where(totals > 0, hits / np.maximum(totals, 1), np.nan)


def group_prevalence(groups, n_groups: int) -> np.ndarray:
    """Доли групп (по умолчанию берутся по обучающим сплитам)"""
    counts = np.bincount(np.asarray(groups, dtype=np.int64), minlength=n_groups).astype(np.float64)
    if counts.sum() == 0:
        raise InvalidInputError("cannot compute prevalence of an empty group vector")
    return counts / counts.sum()


def evaluate(predictions, labels, groups, prevalence: Optional[np.ndarray] = None,
             n_groups: Optional[int] = None) -> GroupDiagnostics:
    """
    Диагностика по группам.

    Args:
        predictions: Вероятности (N, C) или предсказанные метки (N,)
        labels: Истинные классы
        groups: Метки групп
        prevalence: Доли групп для средней точности (по умолчанию равномерные)
        n_groups (int): Число групп G (по умолчанию длина prevalence или max(groups) + 1)

    Returns:
        GroupDiagnostics: Точности по группам, WGA, средняя точность
    """
    predicted = predict_labels(predictions)
    labels = np.asarray(labels, dtype=np.int64)
    groups = np.asarray(groups, dtype=np.int64)
    if not (predicted.shape == labels.shape == groups.shape):
        raise InvalidInputError(
            f"shape mismatch: predictions {predicted.shape}, labels {labels.shape}, groups {groups.shape}"
        )

    if n_groups is None:
        n_groups = len(prevalence) if prevalence is not None else int(groups.max()) + 1
    if prevalence is None:
        prevalence = np.full(n_groups, 1.0 / n_groups)
    prevalence = np.asarray(prevalence, dtype=np.float64)
    if prevalence.shape != (n_groups,):
        raise InvalidInputError(f"prevalence must have {n_groups} entries, got {prevalence.shape}")
    if groups.size and (groups.min() < 0 or groups.max() >= n_groups):
        raise InvalidInputError(f"group index outside prevalence range [0, {n_groups})")
    if abs(prevalence.sum() - 1.0) > 1e-9:
        raise InvalidInputError(f"prevalence must sum to 1, got {prevalence.sum()}")

    accuracy = per_group_accuracy(predicted, labels, groups, n_groups)
    missing = np.flatnonzero(np.isnan(accuracy))
    if missing.size:
        raise MissingGroupsError(missing)

    return GroupDiagnostics(
        per_group_accuracy=accuracy,
        worst_group_accuracy=float(accuracy.min()),
        mean_accuracy=float(np.clip(np.dot(prevalence, accuracy), accuracy.min(), accuracy.max())),
        group_counts=np.bincount(groups, minlength=n_groups),
        prevalence=prevalence,
    )
