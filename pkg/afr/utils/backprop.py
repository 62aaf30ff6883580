# -*- coding: utf-8 -*-
"""
Обучение полносвязных сетей с аналитическим обратным распространением:
экстрактор признаков первой стадии (минибатчевый SGD на кросс-энтропии)
и балансирующая сеть (Adam, полный батч).
"""

import logging
from typing import Optional, Tuple

import numpy as np

from afr.errors import DivergenceError, InvalidInputError
from afr.models.dataset import ERM, EmbeddingDataset
from afr.models.head import LinearHead
from afr.models.mlp import AdamState, BalanceConfig, ExtractorConfig, Mlp
from afr.models.report import BalanceResult, ExtractorResult
from afr.utils.numerics import Rng, log_softmax_rows

logger = logging.getLogger(__name__)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """Один шаг Adam; состояние обновляется на месте"""
    return state.update(np.asarray(params, dtype=np.float64), np.asarray(grads, dtype=np.float64))


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    encoded = np.zeros((labels.size, n_classes))
    encoded[np.arange(labels.size), labels] = 1.0
    return encoded


def cross_entropy_and_gradient(mlp: Mlp, inputs, labels) -> Tuple[float, np.ndarray]:
    """
    Средняя кросс-энтропия сети с logits-выходом и её градиент по всем параметрам.

    Args:
        mlp (Mlp): Сеть с логитами классов на выходе
        inputs: Матрица входов (N, D)
        labels: Метки классов

    Returns:
        tuple: (loss, плоский градиент в порядке Mlp.params())
    """
    labels = np.asarray(labels, dtype=np.int64)
    logits, activations, pre_activations = mlp.forward_cache(inputs)
    if labels.shape != (logits.shape[0],):
        raise InvalidInputError(f"labels length {labels.shape} does not match {logits.shape[0]} rows")
    log_probs = log_softmax_rows(logits)
    rows = np.arange(labels.size)
    loss = float(-log_probs[rows, labels].mean())

    grad_output = np.exp(log_probs)
    grad_output[rows, labels] -= 1.0
    grad_output /= labels.size
    grad_weights, grad_biases = mlp.backward(grad_output, activations, pre_activations)
    return loss, mlp.flat_gradient(grad_weights, grad_biases)


def train_erm_extractor(dataset: EmbeddingDataset,
                        config: Optional[ExtractorConfig] = None,
                        rng: Optional[Rng] = None) -> ExtractorResult:
    """
    Первая стадия: сеть D → hidden → C обучается минибатчевым SGD на ERM-сплите.

    Эмбеддинги берутся из активаций предпоследнего слоя, последний слой становится
    головой первой стадии (и якорем для переобучения).

    Args:
        dataset (EmbeddingDataset): Набор с сырыми признаками и тегами сплитов
        config (ExtractorConfig): Архитектура и параметры SGD
        rng (Rng): Генератор инициализации и порядка минибатчей

    Returns:
        ExtractorResult: Экстрактор, голова, точность на ERM-сплите, loss по эпохам
    """
    config = (config or ExtractorConfig()).validate()
    rng = rng or Rng(0)
    erm = dataset.subset(ERM)
    if erm.n_rows == 0:
        raise InvalidInputError("ERM split is empty")

    layer_sizes = (dataset.dim, *config.hidden, dataset.n_classes)
    mlp = Mlp.init(layer_sizes, rng.spawn(0))
    order_rng = rng.spawn(1)
    features, labels = erm.features, erm.labels

    losses = []
    params = mlp.params()
    for epoch in range(config.epochs):
        order = order_rng.permutation(erm.n_rows)
        total = 0.0
        for start in range(0, erm.n_rows, config.batch_size):
            batch = order[start:start + config.batch_size]
            try:
                loss, grad = cross_entropy_and_gradient(mlp, features[batch], labels[batch])
            except InvalidInputError:
                if epoch == 0 and start == 0:
                    raise
                loss, grad = float('nan'), None
            if grad is None or not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                logger.error(f"❌ Stage-1 training diverged at epoch {epoch}")
                raise DivergenceError(epoch, loss, where="stage-1 training")
            total += loss * batch.size
            params = params - config.learning_rate * grad
            mlp = mlp.with_params(params)
        losses.append(total / erm.n_rows)
        logger.debug(f"stage-1 epoch {epoch}: loss={losses[-1]:.6f}")

    predicted = np.argmax(mlp.forward(features), axis=1)
    train_accuracy = float(np.mean(predicted == labels))
    head = LinearHead.from_anchor(mlp.weights[-1], mlp.biases[-1])
    logger.info(f"✅ Stage-1 extractor trained: {'-'.join(map(str, layer_sizes))}, "
                f"ERM accuracy {train_accuracy:.4f}")
    return ExtractorResult(extractor=mlp, head=head, train_accuracy=train_accuracy, losses=losses)


def cache_embeddings(extractor: Mlp, dataset: EmbeddingDataset) -> EmbeddingDataset:
    """Замена признаков на активации предпоследнего слоя; метки, группы и сплиты сохраняются"""
    return dataset.with_features(extractor.embed(dataset.features))


def balance_inputs(p_erm, labels) -> np.ndarray:
    """Вход балансирующей сети: строка вероятностей ⊕ one-hot метка"""
    p_erm = np.asarray(p_erm, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if p_erm.ndim != 2 or labels.shape != (p_erm.shape[0],):
        raise InvalidInputError(f"shape mismatch: probabilities {p_erm.shape}, labels {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= p_erm.shape[1]):
        raise InvalidInputError(f"label index out of range [0, {p_erm.shape[1]})")
    return np.hstack([p_erm, one_hot(labels, p_erm.shape[1])])


def balance_loss(aggregated) -> float:
    """(1/G) Σ_g |A_g − 1/G|"""
    aggregated = np.asarray(aggregated, dtype=np.float64)
    return float(np.mean(np.abs(aggregated - 1.0 / aggregated.size)))


def balance_loss_and_gradient(mlp: Mlp, inputs, groups, n_groups: int) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Потеря балансирующей сети и градиент по её параметрам.
    Нормировка весов на сумму 1 входит в граф вычислений; субградиент |·| в нуле равен 0.

    Returns:
        tuple: (loss, плоский градиент, групповые веса A)
    """
    raw, activations, pre_activations = mlp.forward_cache(inputs)
    raw = raw[:, 0]
    total = raw.sum()
    weights = raw / total
    aggregated = np.bincount(groups, weights=weights, minlength=n_groups)
    loss = balance_loss(aggregated)

    grad_aggregated = np.sign(aggregated - 1.0 / n_groups) / n_groups
    grad_weights = grad_aggregated[groups]
    grad_raw = (grad_weights - np.dot(weights, grad_weights)) / total
    grad_w, grad_b = mlp.backward(grad_raw[:, None], activations, pre_activations)
    return loss, mlp.flat_gradient(grad_w, grad_b), aggregated


def train_balance_learner(p_erm,
                          labels,
                          groups,
                          n_groups: int,
                          config: Optional[BalanceConfig] = None,
                          rng: Optional[Rng] = None) -> BalanceResult:
    """
    Обучение сети f(p, y) > 0, веса которой после нормировки выравнивают
    суммарные веса групп к 1/G.

    Args:
        p_erm: Вероятности первой стадии (N, C)
        labels: Метки классов
        groups: Метки групп
        n_groups (int): Число групп G
        config (BalanceConfig): Архитектура, число шагов, шаг Adam
        rng (Rng): Генератор инициализации

    Returns:
        BalanceResult: Сеть, траектория (steps + 1) × G, loss по шагам
    """
    config = (config or BalanceConfig()).validate()
    rng = rng or Rng(0)
    inputs = balance_inputs(p_erm, labels)
    groups = np.asarray(groups, dtype=np.int64)
    if groups.shape != (inputs.shape[0],):
        raise InvalidInputError(f"groups length {groups.shape} does not match {inputs.shape[0]} rows")
    if n_groups < 1 or (groups.size and (groups.min() < 0 or groups.max() >= n_groups)):
        raise InvalidInputError(f"group index out of range [0, {n_groups})")

    mlp = Mlp.init((inputs.shape[1], *config.hidden, 1), rng, output_transform='softplus')
    adam = AdamState(learning_rate=config.learning_rate)
    params = mlp.params()

    trajectory, losses = [], []
    for step in range(config.steps + 1):
        loss, grad, aggregated = balance_loss_and_gradient(mlp, inputs, groups, n_groups)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            logger.error(f"❌ Balance learner diverged at step {step}")
            raise DivergenceError(step, loss, where="balance learner")
        trajectory.append(aggregated)
        losses.append(loss)
        if step == config.steps:
            break
        params = adam_step(adam, params, grad)
        mlp = mlp.with_params(params)

    logger.info(f"✅ Balance learner trained for {config.steps} steps, final loss {losses[-1]:.6f}")
    return BalanceResult(mlp=mlp, trajectory=np.vstack(trajectory), losses=losses)


__all__ = [
    'adam_step',
    'cross_entropy_and_gradient',
    'train_erm_extractor',
    'cache_embeddings',
    'balance_inputs',
    'balance_loss',
    'balance_loss_and_gradient',
    'train_balance_learner',
]
