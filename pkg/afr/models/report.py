# -*- coding: utf-8 -*-
"""
Отчёты: диагностика по группам, отчёт обучения головы, результаты перебора.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from afr.models.head import LinearHead
from afr.models.mlp import Mlp


def _plain(value):
    """Числа numpy → float/None для JSON (NaN становится None)"""
    if value is None:
        return None
    value = float(value)
    return None if math.isnan(value) else value


@dataclass(frozen=True, eq=False)
class GroupDiagnostics:
    """
    Точности по группам, worst-group accuracy и средняя точность,
    взвешенная по распространённости групп в обучающих данных.
    """

    per_group_accuracy: np.ndarray
    worst_group_accuracy: float
    mean_accuracy: float
    group_counts: np.ndarray
    prevalence: np.ndarray

    def to_dict(self) -> Dict:
        return {
            'per_group_accuracy': [_plain(a) for a in self.per_group_accuracy],
            'worst_group_accuracy': _plain(self.worst_group_accuracy),
            'mean_accuracy': _plain(self.mean_accuracy),
            'group_counts': [int(c) for c in self.group_counts],
            'prevalence': [_plain(p) for p in self.prevalence],
        }


@dataclass(eq=False)
class TrainReport:
    """
    Итог обучения головы. Эпоха 0 соответствует исходной (якорной) голове,
    эпоха k соответствует параметрам после k шагов.
    """

    losses: List[float]
    val_group_accuracy: List[np.ndarray]
    val_wga: List[float]
    selected_epoch: int
    head: LinearHead

    @property
    def n_epochs(self) -> int:
        return len(self.losses) - 1

    @property
    def selected_val_wga(self) -> Optional[float]:
        if not self.val_wga:
            return None
        return self.val_wga[self.selected_epoch]

    def to_dict(self) -> Dict:
        return {
            'losses': [_plain(v) for v in self.losses],
            'val_wga': [_plain(v) for v in self.val_wga],
            'val_group_accuracy': [[_plain(a) for a in row] for row in self.val_group_accuracy],
            'n_epochs': self.n_epochs,
            'selected_epoch': self.selected_epoch,
            'head': self.head.to_dict(),
        }


@dataclass(eq=False)
class TrialRecord:
    """Одна точка перебора гиперпараметров"""

    index: int
    gamma: float
    lam: float
    learning_rate: float
    seed: int
    status: str = 'ok'
    val_wga: float = float('nan')
    selected_epoch: int = -1
    test: Optional[GroupDiagnostics] = None
    error: Optional[str] = None
    report: Optional[TrainReport] = field(default=None, repr=False)

    @property
    def test_wga(self) -> float:
        return self.test.worst_group_accuracy if self.test is not None else float('nan')

    @property
    def test_mean_accuracy(self) -> float:
        return self.test.mean_accuracy if self.test is not None else float('nan')

    @property
    def selectable(self) -> bool:
        return self.status != 'failed' and not math.isnan(self.val_wga)

    def to_row(self) -> Dict:
        """Строка CSV с фиксированными колонками"""
        return {
            'gamma': self.gamma,
            'lambda': self.lam,
            'learning_rate': self.learning_rate,
            'seed': self.seed,
            'val_wga': self.val_wga,
            'test_wga': self.test_wga,
            'test_mean_acc': self.test_mean_accuracy,
            'selected_epoch': self.selected_epoch,
            'status': self.status,
        }


@dataclass(eq=False)
class SweepResult:
    """Все пробы перебора и индекс выбранной по валидационному WGA"""

    trials: List[TrialRecord]
    best_index: Optional[int]
    selection_rule: str = 'max_val_wga_first'

    @property
    def best(self) -> Optional[TrialRecord]:
        return None if self.best_index is None else self.trials[self.best_index]

    def to_dict(self) -> Dict:
        best = self.best
        return {
            'n_trials': len(self.trials),
            'best_index': self.best_index,
            'selection_rule': self.selection_rule,
            'best': None if best is None else best.to_row(),
            'n_failed': sum(1 for t in self.trials if t.status == 'failed'),
        }


@dataclass(eq=False)
class ExtractorResult:
    """Экстрактор первой стадии, его голова (якорь) и точность на ERM-сплите"""

    extractor: Mlp
    head: LinearHead
    train_accuracy: float
    losses: List[float]

    def to_dict(self) -> Dict:
        return {
            'extractor': self.extractor.to_dict(),
            'head': self.head.to_dict(),
            'train_accuracy': _plain(self.train_accuracy),
            'losses': [_plain(v) for v in self.losses],
        }


@dataclass(eq=False)
class BalanceResult:
    """
    Балансирующая сеть и траектория групповых весов.
    trajectory[t, g]: суммарный вес группы g после t шагов (строка 0 до обучения).
    """

    mlp: Mlp
    trajectory: np.ndarray
    losses: List[float]

    @property
    def final_weights(self) -> np.ndarray:
        return self.trajectory[-1]

    def to_dict(self) -> Dict:
        return {
            'network': self.mlp.to_dict(),
            'steps': int(self.trajectory.shape[0] - 1),
            'final_group_weights': [_plain(w) for w in self.final_weights],
            'final_loss': _plain(self.losses[-1]),
        }
