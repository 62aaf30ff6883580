# -*- coding: utf-8 -*-
"""
Таблицы для графиков: групповые веса от γ, тестовый WGA и N_eff от γ,
траектория балансирующей сети. Сами графики не строятся.
"""

import logging
from dataclasses import replace
from typing import Sequence

import numpy as np
import pandas as pd

from afr.models.dataset import RW, EmbeddingDataset
from afr.models.head import LinearHead
from afr.utils.sweep import SweepSpec, run_sweep
from afr.utils.trainer import predict_probs
from afr.utils.weights import WeightScheme, compute_weights, correct_class_probs, effective_sample_size, weight_sweep_table

logger = logging.getLogger(__name__)


def _long_table(index_name: str, index_values, matrix: np.ndarray) -> pd.DataFrame:
    """(K, G) → строки (index, group, aggregated_weight)"""
    n_rows, n_groups = matrix.shape
    return pd.DataFrame({
        index_name: np.repeat(np.asarray(index_values), n_groups),
        'group': np.tile(np.arange(n_groups), n_rows),
        'aggregated_weight': matrix.ravel(),
    })


def _rw_probabilities(dataset: EmbeddingDataset, stage1_head: LinearHead):
    rw = dataset.subset(RW)
    p_hat = correct_class_probs(predict_probs(stage1_head, rw.features), rw.labels)
    return rw, p_hat


def gamma_group_weight_table(dataset: EmbeddingDataset, stage1_head: LinearHead,
                             gammas: Sequence[float], kind: str) -> pd.DataFrame:
    """
    Суммарный вес каждой группы на RW-сплите для каждого γ.

    Returns:
        pd.DataFrame: Колонки gamma, group, aggregated_weight
    """
    rw, p_hat = _rw_probabilities(dataset, stage1_head)
    table = weight_sweep_table(p_hat, rw.labels, rw.require_groups(), gammas, kind, dataset.n_groups)
    return _long_table('gamma', table['gammas'], table['aggregated'])


def gamma_wga_neff_table(dataset: EmbeddingDataset,
                         stage1_head: LinearHead,
                         spec: SweepSpec,
                         jobs: int = 1) -> pd.DataFrame:
    """
    Тестовый WGA (среднее и std по сидам) и N_eff для каждого γ при λ = 0.

    Args:
        dataset (EmbeddingDataset): Эмбеддинги со всеми сплитами
        stage1_head (LinearHead): Голова первой стадии
        spec (SweepSpec): Сетка γ, learning rate, сиды; λ принудительно 0

    Returns:
        pd.DataFrame: Колонки gamma, test_wga_mean, test_wga_std, n_eff
    """
    rw, p_hat = _rw_probabilities(dataset, stage1_head)
    correct = np.argmax(predict_probs(stage1_head, rw.features), axis=1) == rw.labels

    rows = []
    for gamma in spec.gammas:
        point = replace(spec, gammas=(float(gamma),), lambdas=(0.0,))
        result = run_sweep(dataset, stage1_head, point, jobs=jobs)
        # лучшая проба по learning rate для каждого сида
        scores = []
        for seed in point.seeds:
            per_seed = [t for t in result.trials if t.seed == seed and t.selectable]
            if per_seed:
                scores.append(max(per_seed, key=lambda t: t.val_wga).test_wga)
        mu = compute_weights(WeightScheme(kind=spec.scheme_kind, gamma=float(gamma),
                                          upweight_lambda=spec.upweight_lambda),
                             p_hat, rw.labels, correct=correct, groups=rw.groups)
        rows.append({
            'gamma': float(gamma),
            'test_wga_mean': float(np.mean(scores)) if scores else float('nan'),
            'test_wga_std': float(np.std(scores)) if scores else float('nan'),
            'n_eff': effective_sample_size(mu),
        })
    return pd.DataFrame(rows, columns=['gamma', 'test_wga_mean', 'test_wga_std', 'n_eff'])


def trajectory_table(trajectory: np.ndarray) -> pd.DataFrame:
    """
    Траектория балансирующей сети в длинном формате.

    Returns:
        pd.DataFrame: Колонки step, group, aggregated_weight
    """
    trajectory = np.asarray(trajectory, dtype=np.float64)
    return _long_table('step', np.arange(trajectory.shape[0]), trajectory)


def read_trajectory(frame: pd.DataFrame) -> np.ndarray:
    """Обратное преобразование длинной таблицы траектории в матрицу (steps + 1, G)"""
    pivot = frame.pivot(index='step', columns='group', values='aggregated_weight').sort_index()
    return pivot.to_numpy(dtype=np.float64)
