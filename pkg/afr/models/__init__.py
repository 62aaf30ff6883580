# -*- coding: utf-8 -*-
"""
Модели данных: наборы эмбеддингов, линейная голова, MLP и отчёты.
Модули этого пакета не импортируют afr.utils.
"""

from .dataset import EmbeddingDataset, SyntheticSpec
from .head import LinearHead, TrainConfig
from .mlp import AdamState, BalanceConfig, ExtractorConfig, Mlp
from .report import BalanceResult, ExtractorResult, GroupDiagnostics, SweepResult, TrainReport, TrialRecord

# Это позволяет делать: from afr.models import LinearHead, TrainConfig
__all__ = [
    'EmbeddingDataset',
    'SyntheticSpec',
    'LinearHead',
    'TrainConfig',
    'Mlp',
    'AdamState',
    'ExtractorConfig',
    'BalanceConfig',
    'GroupDiagnostics',
    'TrainReport',
    'TrialRecord',
    'SweepResult',
    'ExtractorResult',
    'BalanceResult',
]
