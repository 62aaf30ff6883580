# -*- coding: utf-8 -*-
"""
Перебор гиперпараметров (γ, λ, learning rate) с выбором по валидационному WGA
и эксперимент эффективности по меткам групп (доли валидации).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from afr.errors import DivergenceError, InvalidInputError
from afr.models.dataset import ERM, RW, TEST, VAL, EmbeddingDataset
from afr.models.head import LinearHead, TrainConfig
from afr.models.report import GroupDiagnostics, SweepResult, TrialRecord
from afr.utils.data_generator import subsample_validation
from afr.utils.metrics import evaluate, group_prevalence
from afr.utils.numerics import Rng
from afr.utils.trainer import eval_set, predict_probs, train, train_dfr
from afr.utils.weights import AFR_EXPONENTIAL, SCHEME_KINDS, WeightScheme, compute_weights, correct_class_probs

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ['gamma', 'lambda', 'learning_rate', 'seed', 'val_wga', 'test_wga',
                 'test_mean_acc', 'selected_epoch', 'status']


@dataclass(frozen=True)
class SweepSpec:
    """
    Сетка перебора.

    Attributes:
        gammas, lambdas, learning_rates: Непустые сетки (γ ≥ 0, λ ≥ 0, lr > 0)
        scheme_kind: Форма весов
        train_template: Остальные параметры обучения головы
        validation_fraction: Доля валидации, оставляемая для выбора (0, 1]
        seeds: Сиды подвыборки валидации
        upweight_lambda: Множитель для jtt_binary
    """

    gammas: Tuple[float, ...] = (0.0,)
    lambdas: Tuple[float, ...] = (0.0,)
    learning_rates: Tuple[float, ...] = (1e-2,)
    scheme_kind: str = AFR_EXPONENTIAL
    train_template: TrainConfig = field(default_factory=TrainConfig)
    validation_fraction: float = 1.0
    seeds: Tuple[int, ...] = (0,)
    upweight_lambda: float = 1.0

    def __post_init__(self):
        for name in ('gammas', 'lambdas', 'learning_rates', 'seeds'):
            values = tuple(getattr(self, name))
            if not values:
                raise InvalidInputError(f"sweep grid '{name}' must not be empty")
            object.__setattr__(self, name, values)
        if any(not g >= 0 for g in self.gammas):
            raise InvalidInputError("sweep gammas must be non-negative")
        if any(not lam >= 0 for lam in self.lambdas):
            raise InvalidInputError("sweep lambdas must be non-negative")
        if any(not lr > 0 for lr in self.learning_rates):
            raise InvalidInputError("sweep learning rates must be positive")
        if self.scheme_kind not in SCHEME_KINDS:
            raise InvalidInputError(f"unknown weight scheme '{self.scheme_kind}'")
        if not 0 < self.validation_fraction <= 1:
            raise InvalidInputError(f"validation_fraction must lie in (0, 1], got {self.validation_fraction}")

    @property
    def n_trials(self) -> int:
        return len(self.gammas) * len(self.lambdas) * len(self.learning_rates) * len(self.seeds)

    def grid(self) -> List[Tuple[float, float, float, int]]:
        """Точки сетки в порядке индексов проб"""
        return [
            (float(gamma), float(lam), float(lr), int(seed))
            for gamma in self.gammas
            for lam in self.lambdas
            for lr in self.learning_rates
            for seed in self.seeds
        ]

    def to_dict(self) -> Dict:
        return {
            'gammas': list(self.gammas),
            'lambdas': list(self.lambdas),
            'learning_rates': list(self.learning_rates),
            'scheme_kind': self.scheme_kind,
            'train_template': self.train_template.to_dict(),
            'validation_fraction': self.validation_fraction,
            'seeds': list(self.seeds),
            'upweight_lambda': self.upweight_lambda,
        }


class _SweepContext:
    """Общие для всех проб неизменяемые данные"""

    def __init__(self, dataset: EmbeddingDataset, stage1_head: LinearHead, spec: SweepSpec):
        dataset.require_groups()
        self.dataset = dataset
        self.head = stage1_head
        self.spec = spec
        self.n_groups = dataset.n_groups

        self.rw = dataset.subset(RW)
        if self.rw.n_rows == 0:
            raise InvalidInputError("RW split is empty")
        probs = predict_probs(stage1_head, self.rw.features)
        self.p_hat = correct_class_probs(probs, self.rw.labels)
        self.correct = np.argmax(probs, axis=1) == self.rw.labels

        train_groups = dataset.subset(ERM, RW).groups
        self.prevalence = group_prevalence(train_groups, self.n_groups)

        self.test = dataset.subset(TEST)
        if self.test.n_rows and np.any(self.test.group_counts() == 0):
            missing = np.flatnonzero(self.test.group_counts() == 0)
            raise InvalidInputError(f"TEST split lacks groups {missing.tolist()}")

        # подвыборка валидации зависит только от сида
        self.validation = {seed: self._validation_for(seed) for seed in spec.seeds}

    def _validation_for(self, seed: int) -> EmbeddingDataset:
        if self.spec.validation_fraction >= 1:
            return self.dataset
        return subsample_validation(self.dataset, self.spec.validation_fraction, Rng(seed))

    def test_diagnostics(self, head: LinearHead) -> Optional[GroupDiagnostics]:
        if self.test.n_rows == 0:
            return None
        return evaluate(predict_probs(head, self.test.features), self.test.labels, self.test.groups,
                        prevalence=self.prevalence, n_groups=self.n_groups)


def _run_trial(context: _SweepContext, index: int, gamma: float, lam: float, lr: float, seed: int) -> TrialRecord:
    record = TrialRecord(index=index, gamma=gamma, lam=lam, learning_rate=lr, seed=seed)
    spec = context.spec
    validation_data = context.validation[seed]
    validation = eval_set(validation_data, VAL)

    config = replace(spec.train_template, learning_rate=lr, lam=lam)
    present = 0 if validation is None else np.unique(validation.groups).size
    if present < 2:
        record.status = 'degraded'
        config = replace(config, early_stopping=False)

    scheme = WeightScheme(kind=spec.scheme_kind, gamma=gamma, upweight_lambda=spec.upweight_lambda)
    mu = compute_weights(scheme, context.p_hat, context.rw.labels, correct=context.correct, groups=context.rw.groups)
    try:
        report = train(context.head, context.rw.features, context.rw.labels, config, mu=mu,
                       groups=context.rw.groups, validation=validation, n_groups=context.n_groups)
    except DivergenceError as error:
        logger.warning(f"⚠️ Trial {index} (gamma={gamma}, lambda={lam}, lr={lr}) failed: {error}")
        record.status = 'failed'
        record.error = str(error)
        return record

    record.report = report
    record.selected_epoch = report.selected_epoch
    selected_wga = report.selected_val_wga
    record.val_wga = float('nan') if selected_wga is None else selected_wga
    record.test = context.test_diagnostics(report.head)
    return record


def select_best(trials: Sequence[TrialRecord]) -> Optional[int]:
    """Индекс пробы с максимальным валидационным WGA (первая при равенстве)"""
    best_index, best_wga = None, -math.inf
    for position, trial in enumerate(trials):
        if trial.selectable and trial.val_wga > best_wga:
            best_index, best_wga = position, trial.val_wga
    return best_index


def run_sweep(dataset: EmbeddingDataset, stage1_head: LinearHead, spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """
    Перебор сетки: для каждой точки и сида считаются веса, обучается голова,
    записываются валидационный WGA выбранной эпохи и диагностика на тесте.
    Выбор делается только по валидации.

    Args:
        dataset (EmbeddingDataset): Эмбеддинги с RW/VAL/TEST и метками групп
        stage1_head (LinearHead): Голова первой стадии (якорь)
        spec (SweepSpec): Сетка
        jobs (int): Число потоков для проб

    Returns:
        SweepResult: Все пробы в порядке сетки и индекс лучшей
    """
    context = _SweepContext(dataset, stage1_head, spec)
    grid = spec.grid()
    logger.info(f"📊 Running sweep: {len(grid)} trials, {spec.scheme_kind}, jobs={jobs}")

    if jobs <= 1:
        trials = [_run_trial(context, index, *point) for index, point in enumerate(grid)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            futures = [executor.submit(_run_trial, context, index, *point) for index, point in enumerate(grid)]
            trials = sorted((future.result() for future in futures), key=lambda trial: trial.index)

    best_index = select_best(trials)
    if best_index is None:
        logger.warning("⚠️ No selectable trial in sweep")
    else:
        best = trials[best_index]
        logger.info(f"✅ Best trial {best_index}: gamma={best.gamma}, lambda={best.lam}, "
                    f"lr={best.learning_rate}, val_wga={best.val_wga:.4f}")
    return SweepResult(trials=trials, best_index=best_index)


def sweep_table(result: SweepResult) -> pd.DataFrame:
    """Таблица проб для CSV"""
    return pd.DataFrame([trial.to_row() for trial in result.trials], columns=SWEEP_COLUMNS)


LABEL_EFFICIENCY_COLUMNS = ['fraction', 'test_wga_mean', 'test_wga_std', 'n_trials',
                            'dfr_test_wga_mean', 'dfr_test_wga_std']


@dataclass(eq=False)
class LabelEfficiencyResult:
    """Сводка по долям валидации и отдельные прогоны (fraction, seed)"""

    rows: List[Dict]
    runs: List[Dict]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=LABEL_EFFICIENCY_COLUMNS)

    def runs_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.runs)


def _mean_std(scores: List[float]) -> Tuple[float, float]:
    if not scores:
        return float('nan'), float('nan')
    return float(np.mean(scores)), float(np.std(scores))


def _dfr_test_wga(dataset: EmbeddingDataset, stage1_head: LinearHead, config: TrainConfig,
                  seed: int, prevalence: np.ndarray) -> float:
    """DFR на подвыборке валидации, WGA на полном тесте"""
    test = dataset.subset(TEST)
    if test.n_rows == 0:
        return float('nan')
    try:
        report = train_dfr(stage1_head, dataset, config, Rng(seed))
    except DivergenceError as error:
        logger.warning(f"⚠️ DFR on validation subsample (seed={seed}) failed: {error}")
        return float('nan')
    diagnostics = evaluate(predict_probs(report.head, test.features), test.labels, test.groups,
                           prevalence=prevalence, n_groups=dataset.n_groups)
    return diagnostics.worst_group_accuracy


def label_efficiency_curve(dataset: EmbeddingDataset,
                           stage1_head: LinearHead,
                           spec: SweepSpec,
                           fractions: Sequence[float],
                           seeds: Sequence[int],
                           jobs: int = 1,
                           subsampled_early_stopping: bool = True,
                           dfr_config: Optional[TrainConfig] = None) -> LabelEfficiencyResult:
    """
    Для каждой доли и сида: подвыборка валидации, полный перебор с выбором
    по ней, оценка выбранной модели на полном тесте.

    Args:
        dataset (EmbeddingDataset): Эмбеддинги с RW/VAL/TEST и метками групп
        stage1_head (LinearHead): Голова первой стадии
        spec (SweepSpec): Сетка перебора (validation_fraction и seeds заменяются)
        fractions: Доли валидации в (0, 1]
        seeds: Сиды подвыборки
        jobs (int): Потоки для проб
        subsampled_early_stopping (bool): Ранняя остановка при доле < 1
            (при False берётся последняя эпоха, выбор по валидации остаётся)
        dfr_config (TrainConfig): Если задан, на той же подвыборке обучается DFR

    Returns:
        LabelEfficiencyResult: Среднее и std тестового WGA по сидам для каждой доли
    """
    if not fractions or not seeds:
        raise InvalidInputError("fractions and seeds must not be empty")
    for fraction in fractions:
        if not 0 < fraction <= 1:
            raise InvalidInputError(f"fraction must lie in (0, 1], got {fraction}")

    prevalence = group_prevalence(dataset.subset(ERM, RW).require_groups(), dataset.n_groups)
    rows, runs = [], []
    for fraction in fractions:
        scores, dfr_scores = [], []
        template = spec.train_template
        if fraction < 1 and not subsampled_early_stopping:
            template = replace(template, early_stopping=False)
        for seed in seeds:
            sub_spec = replace(spec, validation_fraction=float(fraction), seeds=(int(seed),),
                               train_template=template)
            result = run_sweep(dataset, stage1_head, sub_spec, jobs=jobs)
            best = result.best
            test_wga = best.test_wga if best is not None else float('nan')
            run = {
                'fraction': float(fraction),
                'seed': int(seed),
                'gamma': None if best is None else best.gamma,
                'lambda': None if best is None else best.lam,
                'learning_rate': None if best is None else best.learning_rate,
                'val_wga': float('nan') if best is None else best.val_wga,
                'selected_epoch': -1 if best is None else best.selected_epoch,
                'test_wga': test_wga,
                'status': 'failed' if best is None else best.status,
                'dfr_test_wga': float('nan'),
            }
            if not math.isnan(test_wga):
                scores.append(test_wga)

            if dfr_config is not None:
                subsample = subsample_validation(dataset, float(fraction), Rng(int(seed)))
                run['dfr_test_wga'] = _dfr_test_wga(subsample, stage1_head, dfr_config, int(seed), prevalence)
                if not math.isnan(run['dfr_test_wga']):
                    dfr_scores.append(run['dfr_test_wga'])
            runs.append(run)

        mean, std = _mean_std(scores)
        dfr_mean, dfr_std = _mean_std(dfr_scores)
        rows.append({
            'fraction': float(fraction),
            'test_wga_mean': mean,
            'test_wga_std': std,
            'n_trials': len(scores),
            'dfr_test_wga_mean': dfr_mean,
            'dfr_test_wga_std': dfr_std,
        })
        logger.info(f"📊 Validation fraction {fraction}: mean test WGA {mean:.4f}"
                    + (f", DFR {dfr_mean:.4f}" if dfr_config is not None else ""))
    return LabelEfficiencyResult(rows=rows, runs=runs)
