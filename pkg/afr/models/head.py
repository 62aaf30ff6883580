# -*- coding: utf-8 -*-
"""
Модель линейной головы (последний слой) и конфигурация её переобучения.
"""

from dataclasses import dataclass, asdict
from typing import Dict

import numpy as np

from afr.errors import InvalidInputError

OBJECTIVES = ('erm', 'afr', 'gdro')


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=np.float64, order='C')
    array.setflags(write=False)
    return array


class LinearHead:
    """
    Мультиномиальная логистическая голова: logits = W x + b.
    Хранит якорь φ̂ = (anchor_weights, anchor_bias), параметры после первой стадии.
    """

    def __init__(self, weights, bias, anchor_weights=None, anchor_bias=None):
        self.weights = _frozen(weights)
        self.bias = _frozen(bias)
        self.anchor_weights = _frozen(self.weights if anchor_weights is None else anchor_weights)
        self.anchor_bias = _frozen(self.bias if anchor_bias is None else anchor_bias)

        if self.weights.ndim != 2:
            raise InvalidInputError(f"head weights must be C×D, got shape {self.weights.shape}")
        n_classes = self.weights.shape[0]
        if self.bias.shape != (n_classes,):
            raise InvalidInputError(f"head bias must have {n_classes} entries, got shape {self.bias.shape}")
        if self.anchor_weights.shape != self.weights.shape or self.anchor_bias.shape != self.bias.shape:
            raise InvalidInputError("anchor parameters must match head parameter shapes")
        for array in (self.weights, self.bias, self.anchor_weights, self.anchor_bias):
            if not np.all(np.isfinite(array)):
                raise InvalidInputError("head parameters contain non-finite entries")

    @classmethod
    def from_anchor(cls, weights, bias) -> 'LinearHead':
        """Голова, инициализированная в своём якоре (φ₀ = φ̂)"""
        return cls(weights, bias, weights, bias)

    @classmethod
    def zeros(cls, n_classes: int, dim: int) -> 'LinearHead':
        return cls.from_anchor(np.zeros((n_classes, dim)), np.zeros(n_classes))

    def __repr__(self):
        return f'<LinearHead C={self.n_classes} D={self.dim}>'

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def n_params(self) -> int:
        return self.weights.size + self.bias.size

    def params(self) -> np.ndarray:
        """Плоский вектор φ = (vec W, b)"""
        return np.concatenate([self.weights.ravel(), self.bias])

    def anchor_params(self) -> np.ndarray:
        return np.concatenate([self.anchor_weights.ravel(), self.anchor_bias])

    def with_params(self, flat) -> 'LinearHead':
        """Новая голова с параметрами flat и тем же якорем"""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise InvalidInputError(f"expected {self.n_params} parameters, got shape {flat.shape}")
        split_at = self.weights.size
        return LinearHead(
            flat[:split_at].reshape(self.weights.shape),
            flat[split_at:],
            self.anchor_weights,
            self.anchor_bias,
        )

    def logits(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.dim:
            raise InvalidInputError(f"feature dim mismatch: head expects {self.dim}, got shape {features.shape}")
        return features @ self.weights.T + self.bias

    def distance_to_anchor(self) -> float:
        return float(np.linalg.norm(self.params() - self.anchor_params()))

    def same_as(self, other: 'LinearHead') -> bool:
        """Побитовое совпадение всех параметров"""
        return all(
            np.array_equal(a, b)
            for a, b in (
                (self.weights, other.weights),
                (self.bias, other.bias),
                (self.anchor_weights, other.anchor_weights),
                (self.anchor_bias, other.anchor_bias),
            )
        )

    def to_dict(self) -> Dict:
        return {
            'n_classes': self.n_classes,
            'dim': self.dim,
            'distance_to_anchor': self.distance_to_anchor(),
        }


@dataclass(frozen=True)
class TrainConfig:
    """
    Параметры полнобатчевого градиентного спуска для головы.

    Attributes:
        learning_rate: Шаг спуска (> 0)
        max_epochs: Число шагов (≥ 1)
        lam: Коэффициент якорной регуляризации λ ≥ 0
        grad_clip_norm: Порог L2-нормы градиента
        early_stopping: Возвращать эпоху с лучшим валидационным WGA
        objective: erm, afr или gdro
    """

    learning_rate: float = 1e-2
    max_epochs: int = 500
    lam: float = 0.0
    grad_clip_norm: float = 1.0
    early_stopping: bool = True
    objective: str = 'afr'

    def validate(self):
        if not self.learning_rate > 0:
            raise InvalidInputError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_epochs < 1:
            raise InvalidInputError(f"max_epochs must be at least 1, got {self.max_epochs}")
        if self.lam < 0:
            raise InvalidInputError(f"lambda must be non-negative, got {self.lam}")
        if not self.grad_clip_norm > 0:
            raise InvalidInputError(f"grad_clip_norm must be positive, got {self.grad_clip_norm}")
        if self.objective not in OBJECTIVES:
            raise InvalidInputError(f"objective must be one of {OBJECTIVES}, got '{self.objective}'")
        return self

    def to_dict(self) -> Dict:
        return asdict(self)
