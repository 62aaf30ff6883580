# -*- coding: utf-8 -*-
"""
Полносвязная сеть с ReLU и состояние оптимизатора Adam.
Используется как экстрактор признаков первой стадии и как «балансирующая» сеть.
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Sequence, Tuple

import numpy as np
from scipy.special import expit

from afr.errors import InvalidInputError

if TYPE_CHECKING:
    from afr.utils.numerics import Rng

OUTPUT_TRANSFORMS = ('logits', 'softplus')


def softplus(values: np.ndarray) -> np.ndarray:
    """log(1 + e^x) без переполнения; снизу ограничен tiny, поэтому строго положителен"""
    return np.maximum(np.logaddexp(0.0, values), np.finfo(np.float64).tiny)


class Mlp:
    """
    Многослойный перцептрон: affine → ReLU → ... → affine → output transform.

    Args:
        layer_sizes: Размеры слоёв (input, hidden..., output)
        weights: Матрицы весов, слой k имеет форму (layer_sizes[k+1], layer_sizes[k])
        biases: Векторы смещений
        output_transform (str): 'logits' (без преобразования) или 'softplus'
    """

    def __init__(self, layer_sizes: Sequence[int], weights: Sequence[np.ndarray],
                 biases: Sequence[np.ndarray], output_transform: str = 'logits'):
        self.layer_sizes = tuple(int(n) for n in layer_sizes)
        if len(self.layer_sizes) < 2:
            raise InvalidInputError("an MLP needs at least an input and an output layer")
        if output_transform not in OUTPUT_TRANSFORMS:
            raise InvalidInputError(f"output_transform must be one of {OUTPUT_TRANSFORMS}")
        self.output_transform = output_transform
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]

        if len(self.weights) != self.n_layers or len(self.biases) != self.n_layers:
            raise InvalidInputError(f"expected {self.n_layers} weight/bias pairs")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[k + 1], self.layer_sizes[k])
            if w.shape != expected or b.shape != (expected[0],):
                raise InvalidInputError(f"layer {k} has shapes {w.shape}/{b.shape}, expected {expected}")

    @classmethod
    def init(cls, layer_sizes: Sequence[int], rng: 'Rng', output_transform: str = 'logits') -> 'Mlp':
        """Инициализация He для ReLU-слоёв, нулевые смещения"""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            weights.append(rng.normal((fan_out, fan_in), scale=np.sqrt(2.0 / fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(layer_sizes, weights, biases, output_transform)

    def __repr__(self):
        return f'<Mlp {"-".join(map(str, self.layer_sizes))} {self.output_transform}>'

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def params(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.extend([w.ravel(), b])
        return np.concatenate(parts)

    def with_params(self, flat) -> 'Mlp':
        flat = np.asarray(flat, dtype=np.float64)
        weights, biases, offset = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(flat[offset:offset + w.size].reshape(w.shape))
            offset += w.size
            biases.append(flat[offset:offset + b.size].copy())
            offset += b.size
        if offset != flat.size:
            raise InvalidInputError(f"expected {offset} parameters, got {flat.size}")
        return Mlp(self.layer_sizes, weights, biases, self.output_transform)

    def _check_inputs(self, inputs) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 2 or inputs.shape[1] != self.layer_sizes[0]:
            raise InvalidInputError(
                f"input dim mismatch: network expects {self.layer_sizes[0]}, got shape {inputs.shape}"
            )
        return inputs

    def forward_cache(self, inputs) -> Tuple[np.ndarray, List[np.ndarray], List[np.ndarray]]:
        """
        Прямой проход с сохранением промежуточных значений для backward.

        Returns:
            tuple: (выход, активации слоёв [вход, h1, ...], преактивации)
        """
        activations = [self._check_inputs(inputs)]
        pre_activations = []
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = activations[-1] @ w.T + b
            pre_activations.append(z)
            if k < self.n_layers - 1:
                activations.append(np.maximum(z, 0.0))
        z_out = pre_activations[-1]
        output = softplus(z_out) if self.output_transform == 'softplus' else z_out
        return output, activations, pre_activations

    def forward(self, inputs) -> np.ndarray:
        return self.forward_cache(inputs)[0]

    def embed(self, inputs) -> np.ndarray:
        """Активации предпоследнего слоя (эмбеддинги)"""
        _, activations, _ = self.forward_cache(inputs)
        return activations[-1]

    def backward(self, grad_output: np.ndarray, activations: List[np.ndarray],
                 pre_activations: List[np.ndarray]) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        """
        Обратное распространение.

        Args:
            grad_output: ∂L/∂(выход сети), форма (N, output)
            activations, pre_activations: Значения из forward_cache

        Returns:
            tuple: (градиенты весов, градиенты смещений)
        """
        delta = np.asarray(grad_output, dtype=np.float64)
        if self.output_transform == 'softplus':
            delta = delta * expit(pre_activations[-1])

        grad_weights = [None] * self.n_layers
        grad_biases = [None] * self.n_layers
        for k in reversed(range(self.n_layers)):
            grad_weights[k] = delta.T @ activations[k]
            grad_biases[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k]) * (pre_activations[k - 1] > 0)
        return grad_weights, grad_biases

    def flat_gradient(self, grad_weights, grad_biases) -> np.ndarray:
        parts = []
        for gw, gb in zip(grad_weights, grad_biases):
            parts.extend([gw.ravel(), gb])
        return np.concatenate(parts)

    def to_dict(self) -> Dict:
        return {
            'layer_sizes': list(self.layer_sizes),
            'output_transform': self.output_transform,
            'n_params': int(self.params().size),
        }


@dataclass
class AdamState:
    """
    Состояние Adam для плоского вектора параметров.
    Моменты создаются при первом шаге с формой параметров.
    """

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: np.ndarray = field(default=None, repr=False)
    second_moment: np.ndarray = field(default=None, repr=False)

    def update(self, params: np.ndarray, gradient: np.ndarray) -> np.ndarray:
        """
        Один шаг Adam.

        Args:
            params: Текущие параметры
            gradient: Градиент той же формы

        Returns:
            np.ndarray: Новые параметры
        """
        if self.first_moment is None:
            self.first_moment = np.zeros_like(params)
            self.second_moment = np.zeros_like(params)
        if self.first_moment.shape != params.shape or gradient.shape != params.shape:
            raise InvalidInputError("Adam moments must match parameter shape")

        self.step += 1
        self.first_moment = self.beta1 * self.first_moment + (1 - self.beta1) * gradient
        self.second_moment = self.beta2 * self.second_moment + (1 - self.beta2) * gradient ** 2
        m_hat = self.first_moment / (1 - self.beta1 ** self.step)
        v_hat = self.second_moment / (1 - self.beta2 ** self.step)
        return params - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class ExtractorConfig:
    """
    Параметры обучения экстрактора первой стадии (минибатчевый SGD).

    Attributes:
        hidden: Ширины скрытых слоёв
        epochs: Число проходов по ERM-сплиту
        learning_rate: Шаг SGD
        batch_size: Размер минибатча
    """

    hidden: Tuple[int, ...] = (32, 32)
    epochs: int = 30
    learning_rate: float = 0.05
    batch_size: int = 64

    def validate(self):
        if not self.hidden or any(width < 1 for width in self.hidden):
            raise InvalidInputError(f"hidden layer widths must be positive, got {self.hidden}")
        if self.epochs < 1:
            raise InvalidInputError(f"epochs must be at least 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise InvalidInputError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise InvalidInputError(f"batch_size must be at least 1, got {self.batch_size}")
        return self

    def to_dict(self) -> Dict:
        return {
            'hidden': list(self.hidden),
            'epochs': self.epochs,
            'learning_rate': self.learning_rate,
            'batch_size': self.batch_size,
        }


@dataclass(frozen=True)
class BalanceConfig:
    """Параметры балансирующей сети: полный батч, Adam"""

    hidden: Tuple[int, ...] = (128, 128)
    steps: int = 2000
    learning_rate: float = 1e-3

    def validate(self):
        if not self.hidden or any(width < 1 for width in self.hidden):
            raise InvalidInputError(f"hidden layer widths must be positive, got {self.hidden}")
        if self.steps < 0:
            raise InvalidInputError(f"steps must be non-negative, got {self.steps}")
        if not self.learning_rate > 0:
            raise InvalidInputError(f"learning_rate must be positive, got {self.learning_rate}")
        return self

    def to_dict(self) -> Dict:
        return {'hidden': list(self.hidden), 'steps': self.steps, 'learning_rate': self.learning_rate}
