# -*- coding: utf-8 -*-
"""
Алгоритмы переобучения последнего слоя.
Импортирует основные вспомогательные модули.
"""

from .numerics import Rng, softmax_rows, log_sum_exp, clip_gradient_norm
from .data_generator import generate_synthetic, split, subsample_validation, group_balanced_subset
from .file_io import (
    read_embedding_file, write_embedding_file, read_embedding_csv, write_embedding_csv,
    read_head_file, write_head_file, read_mlp_file, write_mlp_file,
)
from .weights import WeightScheme, compute_weights, correct_class_probs, group_aggregated_weights, effective_sample_size
from .metrics import evaluate, per_group_accuracy, group_prevalence
from .trainer import predict_probs, loss_erm, loss_afr, loss_gdro, gradient, train, train_dfr
from .backprop import train_erm_extractor, cache_embeddings, train_balance_learner
from .sweep import SweepSpec, run_sweep, label_efficiency_curve

# Экспортируем основные функции
__all__ = [
    'Rng',
    'softmax_rows',
    'log_sum_exp',
    'clip_gradient_norm',
    'generate_synthetic',
    'split',
    'subsample_validation',
    'group_balanced_subset',
    'read_embedding_file',
    'write_embedding_file',
    'read_embedding_csv',
    'write_embedding_csv',
    'read_head_file',
    'write_head_file',
    'read_mlp_file',
    'write_mlp_file',
    'WeightScheme',
    'compute_weights',
    'correct_class_probs',
    'group_aggregated_weights',
    'effective_sample_size',
    'evaluate',
    'per_group_accuracy',
    'group_prevalence',
    'predict_probs',
    'loss_erm',
    'loss_afr',
    'loss_gdro',
    'gradient',
    'train',
    'train_dfr',
    'train_erm_extractor',
    'cache_embeddings',
    'train_balance_learner',
    'SweepSpec',
    'run_sweep',
    'label_efficiency_curve',
]
