# -*- coding: utf-8 -*-
"""
Переобучение последнего слоя: прямой проход, функции потерь (ERM, AFR, GDRO),
аналитические градиенты и полнобатчевый градиентный спуск с обрезкой градиента,
якорной регуляризацией и ранней остановкой по валидационному WGA.

Экстрактор признаков сюда не попадает: модуль работает только с кэшированными
эмбеддингами.
"""

import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np

from afr.errors import DivergenceError, InvalidInputError
from afr.models.dataset import VAL, EmbeddingDataset
from afr.models.head import LinearHead, TrainConfig
from afr.models.report import TrainReport
from afr.utils.data_generator import group_balanced_subset
from afr.utils.metrics import per_group_accuracy
from afr.utils.numerics import Rng, clip_gradient_norm, log_softmax_rows, softmax_rows

logger = logging.getLogger(__name__)


class EvalSet(NamedTuple):
    """Данные для оценки по группам во время обучения"""

    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    n_groups: int


def eval_set(dataset: EmbeddingDataset, split_name=VAL) -> Optional[EvalSet]:
    """EvalSet для сплита или None, если строк нет"""
    part = dataset.subset(split_name)
    if part.n_rows == 0:
        return None
    return EvalSet(part.features, part.labels, part.require_groups(), dataset.n_groups)


def predict_probs(head: LinearHead, features) -> np.ndarray:
    """Вероятности softmax(W x + b), форма (N, C)"""
    return softmax_rows(head.logits(features))


def _per_example_ce(head: LinearHead, features, labels) -> Tuple[np.ndarray, np.ndarray]:
    """Кросс-энтропия каждого примера и вероятности"""
    labels = np.asarray(labels, dtype=np.int64)
    log_probs = log_softmax_rows(head.logits(features))
    if labels.shape != (log_probs.shape[0],):
        raise InvalidInputError(f"labels length {labels.shape} does not match {log_probs.shape[0]} rows")
    if labels.size and (labels.min() < 0 or labels.max() >= head.n_classes):
        raise InvalidInputError(f"label index out of range [0, {head.n_classes})")
    ce = -log_probs[np.arange(labels.size), labels]
    return ce, np.exp(log_probs)


def _check_weights(mu, n_rows: int) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape != (n_rows,):
        raise InvalidInputError(f"weights length {mu.shape} does not match {n_rows} rows")
    if np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-9:
        raise InvalidInputError("weights must be non-negative and sum to 1")
    return mu


def _group_members(groups, n_rows: int, n_groups: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    groups = np.asarray(groups, dtype=np.int64)
    if groups.shape != (n_rows,):
        raise InvalidInputError(f"groups length {groups.shape} does not match {n_rows} rows")
    counts = np.bincount(groups, minlength=n_groups or 0)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise InvalidInputError(f"empty groups in batch: {empty.tolist()}")
    return groups, counts


def anchor_penalty(head: LinearHead, lam: float) -> float:
    """λ‖φ − φ̂‖² по весам и смещению вместе"""
    diff = head.params() - head.anchor_params()
    return float(lam * np.dot(diff, diff))


def loss_erm(head: LinearHead, features, labels) -> float:
    """Средняя кросс-энтропия −(1/N) Σ log p_{yᵢ}(xᵢ)"""
    ce, _ = _per_example_ce(head, features, labels)
    return float(np.dot(np.full(ce.size, 1.0 / ce.size), ce))


def loss_afr(head: LinearHead, features, labels, mu, lam: float) -> float:
    """Σ μᵢ ℓ(xᵢ, yᵢ) + λ‖φ − φ̂‖²"""
    ce, _ = _per_example_ce(head, features, labels)
    mu = _check_weights(mu, ce.size)
    loss = float(np.dot(mu, ce))
    return loss + anchor_penalty(head, lam) if lam else loss


def group_losses(head: LinearHead, features, labels, groups, n_groups: Optional[int] = None) -> np.ndarray:
    """Средняя кросс-энтропия внутри каждой группы"""
    ce, _ = _per_example_ce(head, features, labels)
    groups, counts = _group_members(groups, ce.size, n_groups)
    return np.bincount(groups, weights=ce, minlength=counts.size) / counts


def loss_gdro(head: LinearHead, features, labels, groups, n_groups: Optional[int] = None) -> float:
    """Максимум по группам средней кросс-энтропии"""
    return float(group_losses(head, features, labels, groups, n_groups).max())


def _objective_weights(objective: str, ce: np.ndarray, mu, groups, n_groups) -> np.ndarray:
    """Веса примеров vᵢ такие, что loss = Σ vᵢ ceᵢ (+ штраф для afr)"""
    n_rows = ce.size
    if objective == 'erm':
        return np.full(n_rows, 1.0 / n_rows)
    if objective == 'afr':
        if mu is None:
            raise InvalidInputError("afr objective requires weights")
        return _check_weights(mu, n_rows)
    if objective == 'gdro':
        if groups is None:
            raise InvalidInputError("gdro objective requires group labels")
        groups, counts = _group_members(groups, n_rows, n_groups)
        means = np.bincount(groups, weights=ce, minlength=counts.size) / counts
        # при равенстве берётся группа с меньшим индексом
        worst = int(np.argmax(means))
        return np.where(groups == worst, 1.0 / counts[worst], 0.0)
    raise InvalidInputError(f"unknown objective '{objective}'")


def loss_and_gradient(objective: str, head: LinearHead, features, labels,
                      mu=None, lam: float = 0.0, groups=None,
                      n_groups: Optional[int] = None) -> Tuple[float, np.ndarray]:
    """
    Значение цели и её градиент по плоскому вектору φ = (vec W, b).

    Args:
        objective (str): erm, afr или gdro
        head (LinearHead): Текущая голова
        features, labels: Обучающие данные
        mu: Веса примеров (для afr)
        lam (float): λ якорного штрафа (учитывается только в afr)
        groups: Метки групп (для gdro)
        n_groups (int): Число групп G

    Returns:
        tuple: (loss, градиент)
    """
    features = np.asarray(features, dtype=np.float64)
    ce, probs = _per_example_ce(head, features, labels)
    weights = _objective_weights(objective, ce, mu, groups, n_groups)

    residual = probs.copy()
    residual[np.arange(ce.size), np.asarray(labels, dtype=np.int64)] -= 1.0
    residual *= weights[:, None]
    grad_w = residual.T @ features
    grad_b = residual.sum(axis=0)
    gradient = np.concatenate([grad_w.ravel(), grad_b])
    loss = float(np.dot(weights, ce))

    if objective == 'afr' and lam:
        diff = head.params() - head.anchor_params()
        loss += float(lam * np.dot(diff, diff))
        gradient = gradient + 2.0 * lam * diff
    return loss, gradient


def gradient(objective: str, head: LinearHead, features, labels,
             mu=None, lam: float = 0.0, groups=None, n_groups: Optional[int] = None) -> np.ndarray:
    """Аналитический градиент цели по φ"""
    return loss_and_gradient(objective, head, features, labels, mu, lam, groups, n_groups)[1]


def _validation_wga(head: LinearHead, validation: EvalSet) -> Tuple[np.ndarray, float]:
    predicted = np.argmax(head.logits(validation.features), axis=1)
    accuracy = per_group_accuracy(predicted, validation.labels, validation.groups, validation.n_groups)
    present = accuracy[~np.isnan(accuracy)]
    return accuracy, float(present.min()) if present.size else float('nan')


def train(head: LinearHead,
          features,
          labels,
          config: TrainConfig,
          mu=None,
          groups=None,
          validation: Optional[EvalSet] = None,
          n_groups: Optional[int] = None) -> TrainReport:
    """
    Полнобатчевый градиентный спуск без момента.

    На каждой эпохе: g ← ∇loss; g ← clip(g); φ ← φ − lr·g. Эпоха 0 соответствует исходной голове.
    При early_stopping возвращаются параметры эпохи с максимальным валидационным WGA
    (первой при равенстве), иначе параметры последней эпохи.

    Args:
        head (LinearHead): Голова, инициализированная в якоре
        features, labels: Данные RW-сплита
        config (TrainConfig): Параметры обучения
        mu: Веса μ для цели afr
        groups: Метки групп для цели gdro
        validation (EvalSet): Валидационные данные для ранней остановки
        n_groups (int): Число групп G

    Returns:
        TrainReport: История loss/WGA, выбранная эпоха и голова
    """
    config.validate()
    if config.early_stopping and validation is None:
        logger.warning("⚠️ Early stopping requested without validation data, using the last epoch")
    features = np.asarray(features, dtype=np.float64)
    params = head.params()

    losses, val_accuracy, val_wga = [], [], []
    best_epoch, best_wga, best_params = config.max_epochs, float('-inf'), None

    for epoch in range(config.max_epochs + 1):
        try:
            current = head.with_params(params) if epoch else head
            loss, grad = loss_and_gradient(config.objective, current, features, labels,
                                           mu=mu, lam=config.lam, groups=groups, n_groups=n_groups)
        except InvalidInputError:
            # входы проверены на эпохе 0, позже ошибка возможна только из-за переполнения параметров
            if epoch == 0:
                raise
            loss, grad = float('nan'), None
        if grad is None or not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            logger.error(f"❌ Head training diverged at epoch {epoch}")
            raise DivergenceError(epoch, loss, where="head training")
        losses.append(loss)

        if validation is not None:
            accuracy, wga = _validation_wga(current, validation)
            val_accuracy.append(accuracy)
            val_wga.append(wga)
            if wga > best_wga:
                best_epoch, best_wga, best_params = epoch, wga, params.copy()

        if epoch % 100 == 0:
            logger.debug(f"epoch {epoch}: loss={loss:.6f}" + (f" val_wga={val_wga[-1]:.4f}" if val_wga else ""))
        if epoch == config.max_epochs:
            break
        params = params - config.learning_rate * clip_gradient_norm(grad, config.grad_clip_norm)

    if config.early_stopping and best_params is not None:
        selected_epoch, selected = best_epoch, best_params
    else:
        selected_epoch, selected = config.max_epochs, params

    return TrainReport(
        losses=losses,
        val_group_accuracy=val_accuracy,
        val_wga=val_wga,
        selected_epoch=selected_epoch,
        head=head.with_params(selected),
    )


def train_dfr(head: LinearHead, dataset: EmbeddingDataset, config: TrainConfig, rng: Rng) -> TrainReport:
    """
    Базовая линия DFR для последнего слоя: переобучение на сбалансированной
    по группам подвыборке валидации (равные веса, якорный штраф λ),
    без ранней остановки.

    Args:
        head (LinearHead): Голова первой стадии
        dataset (EmbeddingDataset): Набор с VAL-сплитом и метками групп
        config (TrainConfig): Параметры обучения (objective игнорируется)
        rng (Rng): Генератор подвыборки

    Returns:
        TrainReport: Отчёт обучения на подвыборке
    """
    balanced = group_balanced_subset(dataset, VAL, rng)
    logger.info(f"📊 DFR balanced subset: {balanced.n_rows} rows, {balanced.group_counts().tolist()} per group")
    mu = np.full(balanced.n_rows, 1.0 / balanced.n_rows)
    dfr_config = TrainConfig(
        learning_rate=config.learning_rate,
        max_epochs=config.max_epochs,
        lam=config.lam,
        grad_clip_norm=config.grad_clip_norm,
        early_stopping=False,
        objective='afr',
    )
    return train(head, balanced.features, balanced.labels, dfr_config, mu=mu)
