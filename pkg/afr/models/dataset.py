# -*- coding: utf-8 -*-
"""
Модель набора эмбеддингов и параметры синтетического генератора.
Хранит признаки, метки классов, метки групп и теги сплитов.
"""

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from afr.errors import InvalidInputError

# Теги сплитов (значения совпадают с кодировкой в бинарном файле)
ERM, RW, VAL, TEST = 0, 1, 2, 3
SPLIT_NAMES = ('ERM', 'RW', 'VAL', 'TEST')
SPLIT_CODES = {name: code for code, name in enumerate(SPLIT_NAMES)}


def split_code(split) -> int:
    """Код сплита по имени или числу"""
    if isinstance(split, str):
        try:
            return SPLIT_CODES[split.upper()]
        except KeyError:
            raise InvalidInputError(f"unknown split tag '{split}', expected one of {SPLIT_NAMES}")
    code = int(split)
    if code not in (ERM, RW, VAL, TEST):
        raise InvalidInputError(f"unknown split code {code}")
    return code


@dataclass(frozen=True, eq=False)
class EmbeddingDataset:
    """
    Набор примеров для переобучения последнего слоя.

    Attributes:
        features: Матрица признаков (N, D)
        labels: Метки классов в [0, n_classes)
        split_tags: Теги сплитов ERM/RW/VAL/TEST
        groups: Метки групп в [0, n_groups) или None
        n_classes: Число классов C
        n_groups: Число групп G (0, если групп нет)
        n_attributes: Число значений спурийного признака |S| (0, если неизвестно)
    """

    features: np.ndarray
    labels: np.ndarray
    split_tags: np.ndarray
    groups: Optional[np.ndarray] = None
    n_classes: int = 0
    n_groups: int = 0
    n_attributes: int = 0

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64, order='C')
        labels = np.array(self.labels, dtype=np.int64)
        split_tags = np.array(self.split_tags, dtype=np.int64)
        groups = None if self.groups is None else np.array(self.groups, dtype=np.int64)

        if features.ndim != 2:
            raise InvalidInputError(f"features must be 2-D, got shape {features.shape}")
        n_rows = features.shape[0]
        if labels.shape != (n_rows,) or split_tags.shape != (n_rows,):
            raise InvalidInputError(
                f"row count mismatch: features {n_rows}, labels {labels.shape[0]}, split tags {split_tags.shape[0]}"
            )
        if groups is not None and groups.shape != (n_rows,):
            raise InvalidInputError(f"row count mismatch: features {n_rows}, groups {groups.shape[0]}")
        if not np.all(np.isfinite(features)):
            raise InvalidInputError("features contain non-finite entries")

        n_classes = self.n_classes or (int(labels.max()) + 1 if n_rows else 0)
        if n_rows and (labels.min() < 0 or labels.max() >= n_classes):
            raise InvalidInputError(f"class index out of range [0, {n_classes})")
        if n_rows and (split_tags.min() < ERM or split_tags.max() > TEST):
            raise InvalidInputError("split tag out of range")

        n_groups = 0
        if groups is not None:
            n_groups = self.n_groups or (int(groups.max()) + 1 if n_rows else 0)
            if n_rows and (groups.min() < 0 or groups.max() >= n_groups):
                raise InvalidInputError(f"group index out of range [0, {n_groups})")
            if self.n_attributes and n_rows:
                attributes = groups - labels * self.n_attributes
                if attributes.min() < 0 or attributes.max() >= self.n_attributes:
                    raise InvalidInputError("group index is inconsistent with g = y·|S| + s")

        for array in (features, labels, split_tags, groups):
            if array is not None:
                array.setflags(write=False)

        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'split_tags', split_tags)
        object.__setattr__(self, 'groups', groups)
        object.__setattr__(self, 'n_classes', int(n_classes))
        object.__setattr__(self, 'n_groups', int(n_groups))

    def __repr__(self):
        return f'<EmbeddingDataset N={self.n_rows} D={self.dim} C={self.n_classes} G={self.n_groups}>'

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def has_groups(self) -> bool:
        return self.groups is not None

    def split_mask(self, split) -> np.ndarray:
        return self.split_tags == split_code(split)

    def split_indices(self, split) -> np.ndarray:
        return np.flatnonzero(self.split_mask(split))

    def take(self, indices: Sequence[int]) -> 'EmbeddingDataset':
        """Подмножество строк с сохранением C и G"""
        indices = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            features=self.features[indices],
            labels=self.labels[indices],
            split_tags=self.split_tags[indices],
            groups=None if self.groups is None else self.groups[indices],
        )

    def subset(self, *splits) -> 'EmbeddingDataset':
        """Строки, принадлежащие указанным сплитам"""
        codes = [split_code(s) for s in splits]
        return self.take(np.flatnonzero(np.isin(self.split_tags, codes)))

    def with_features(self, features: np.ndarray) -> 'EmbeddingDataset':
        return replace(self, features=features)

    def with_split_tags(self, split_tags: np.ndarray) -> 'EmbeddingDataset':
        return replace(self, split_tags=split_tags)

    def require_groups(self) -> np.ndarray:
        if self.groups is None:
            raise InvalidInputError("operation requires group labels")
        return self.groups

    def split_counts(self) -> Dict[str, int]:
        counts = np.bincount(self.split_tags, minlength=len(SPLIT_NAMES))
        return {name: int(counts[code]) for code, name in enumerate(SPLIT_NAMES)}

    def group_counts(self, *splits) -> np.ndarray:
        groups = self.require_groups()
        if splits:
            groups = groups[np.isin(self.split_tags, [split_code(s) for s in splits])]
        return np.bincount(groups, minlength=self.n_groups)

    def to_dict(self) -> Dict:
        """Краткое описание набора для логов и provenance"""
        return {
            'n_rows': self.n_rows,
            'dim': self.dim,
            'n_classes': self.n_classes,
            'n_groups': self.n_groups,
            'split_counts': self.split_counts(),
            'group_counts': self.group_counts().tolist() if self.has_groups else None,
        }


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Параметры синтетического набора со спурийной корреляцией.
    Группы: g = y·2 + s, где y: класс, s: спурийный атрибут.
    """

    n_total: int = 5000
    dims: int = 16
    group_proportions: Tuple[float, ...] = (0.73, 0.04, 0.01, 0.22)
    core_separation: float = 1.0
    spurious_separation: float = 3.0
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'group_proportions', tuple(float(p) for p in self.group_proportions))

    def validate(self) -> List[Tuple[str, str]]:
        """
        Проверка параметров.

        Returns:
            list: Пары (поле, описание проблемы); пустой список, если всё корректно
        """
        problems = []
        proportions = np.asarray(self.group_proportions, dtype=np.float64)
        if proportions.shape != (4,):
            problems.append(('group_proportions', f"expected 4 group proportions, got {proportions.size}"))
        elif np.any(proportions <= 0):
            problems.append(('group_proportions', "proportions must be positive"))
        elif abs(proportions.sum() - 1.0) > 1e-9:
            problems.append(('group_proportions', f"proportions sum to {proportions.sum():.12g}, expected 1"))
        if self.dims < 2:
            problems.append(('dims', "need at least 2 dimensions (core and spurious)"))
        for name in ('core_separation', 'spurious_separation', 'noise_std'):
            if not getattr(self, name) > 0:
                problems.append((name, "must be positive"))
        if self.n_total < len(self.group_proportions):
            problems.append(('n_total', "too small to give every group an example"))
        if not 0 <= self.seed < 2 ** 64:
            problems.append(('seed', "must be a 64-bit unsigned integer"))
        return problems

    def to_dict(self) -> Dict:
        return {
            'n_total': self.n_total,
            'dims': self.dims,
            'group_proportions': list(self.group_proportions),
            'core_separation': self.core_separation,
            'spurious_separation': self.spurious_separation,
            'noise_std': self.noise_std,
            'seed': self.seed,
        }
