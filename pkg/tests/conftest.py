# -*- coding: utf-8 -*-
"""
Общие фикстуры тестов.
"""

import os

import numpy as np
import pytest

os.environ.setdefault('AFR_ENV', 'testing')

from afr.models.dataset import ERM, RW, TEST, VAL, EmbeddingDataset, SyntheticSpec  # noqa: E402
from afr.models.head import LinearHead  # noqa: E402
from afr.utils.data_generator import generate_synthetic, split  # noqa: E402
from afr.utils.numerics import Rng  # noqa: E402


@pytest.fixture
def tiny_dataset():
    """16 строк, D = 2, C = 2, G = 4, каждая группа есть в каждом сплите"""
    groups = np.tile(np.arange(4), 4)
    labels = groups // 2
    attributes = groups % 2
    features = np.column_stack([
        np.where(labels == 1, 1.0, -1.0) + 0.1 * np.arange(16) / 16,
        np.where(attributes == 1, 2.0, -2.0),
    ])
    split_tags = np.repeat([ERM, RW, VAL, TEST], 4)
    return EmbeddingDataset(features, labels, split_tags, groups, n_classes=2, n_groups=4, n_attributes=2)


@pytest.fixture(scope='session')
def small_synthetic():
    """Синтетический набор на 1200 строк с разбиением на сплиты"""
    spec = SyntheticSpec(n_total=1200, dims=4, group_proportions=(0.4, 0.1, 0.1, 0.4), seed=7)
    return split(generate_synthetic(spec), erm_fraction=0.5, val_fraction=0.2, test_fraction=0.2, rng=Rng(1))


@pytest.fixture(scope='session')
def small_embeddings(small_synthetic):
    """Набор small_synthetic как эмбеддинги и голова ERM, обученная на ERM-сплите"""
    from afr.models.head import TrainConfig
    from afr.utils.trainer import train

    erm = small_synthetic.subset(ERM)
    report = train(
        LinearHead.zeros(2, small_synthetic.dim),
        erm.features,
        erm.labels,
        TrainConfig(learning_rate=0.5, max_epochs=200, early_stopping=False, objective='erm'),
    )
    stage1 = LinearHead.from_anchor(report.head.weights, report.head.bias)
    return small_synthetic, stage1


@pytest.fixture
def random_head():
    rng = Rng(11)
    return LinearHead.from_anchor(rng.normal((3, 5)), rng.normal(3))
