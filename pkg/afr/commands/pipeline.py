# -*- coding: utf-8 -*-
"""
Команды основного конвейера: generate → train-base → reweight, плюс dfr.
"""

import logging

import numpy as np
import pandas as pd

from afr.commands import (
    AFR_HEAD, DATA_FILE, DFR_DIAGNOSTICS, DFR_HEAD, DFR_KEY, DIAGNOSTICS_FILE, EMBEDDINGS_FILE,
    EXTRACTOR_KEY, SPLIT_KEY, STAGE1_DIAGNOSTICS, STAGE1_HEAD, STAGE1_NETWORK, WEIGHTS_FILE,
    RunContext, pipeline_command,
)
from afr.models.dataset import ERM, RW, TEST, VAL, EmbeddingDataset
from afr.models.head import LinearHead
from afr.utils.backprop import cache_embeddings, train_erm_extractor
from afr.utils.data_generator import generate_synthetic, split
from afr.utils.file_io import (
    write_embedding_file, write_head_file, write_json, write_mlp_file, write_table,
)
from afr.utils.metrics import evaluate, group_prevalence
from afr.utils.trainer import eval_set, predict_probs, train, train_dfr
from afr.utils.weights import (
    WeightScheme, compute_weights, correct_class_probs, effective_sample_size, group_aggregated_weights,
)

logger = logging.getLogger(__name__)


def training_prevalence(dataset: EmbeddingDataset) -> np.ndarray:
    """Доли групп в обучающих сплитах (ERM + RW)"""
    return group_prevalence(dataset.subset(ERM, RW).require_groups(), dataset.n_groups)


def test_diagnostics(dataset: EmbeddingDataset, head: LinearHead):
    test = dataset.subset(TEST)
    return evaluate(predict_probs(head, test.features), test.labels, test.require_groups(),
                    prevalence=training_prevalence(dataset), n_groups=dataset.n_groups)


@pipeline_command('generate')
def generate(run: RunContext):
    """Синтетический набор с разбиением на сплиты → data.afre"""
    config = run.config
    spec = config.synthetic_spec()
    dataset = split(
        generate_synthetic(spec),
        erm_fraction=config['split.erm_fraction'],
        val_fraction=config['split.val_fraction'],
        test_fraction=config['split.test_fraction'],
        rng=run.rng(SPLIT_KEY),
        stratify=config['split.stratify'],
    )
    write_embedding_file(dataset, run.path(DATA_FILE))
    run.write_provenance('generate', {'dataset': dataset.to_dict(), 'synthetic': spec.to_dict()})


@pipeline_command('train-base')
def train_base(run: RunContext):
    """Экстрактор первой стадии на ERM-сплите → stage1.afrm, stage1_head.afrh, embeddings.afre"""
    dataset = run.load_raw_data()
    result = train_erm_extractor(dataset, run.config.extractor_config(), run.rng(EXTRACTOR_KEY))
    embeddings = cache_embeddings(result.extractor, dataset)

    write_mlp_file(result.extractor, run.path(STAGE1_NETWORK))
    write_head_file(result.head, run.path(STAGE1_HEAD))
    write_embedding_file(embeddings, run.path(EMBEDDINGS_FILE))

    diagnostics = {'train_accuracy': result.train_accuracy, 'extractor': result.to_dict()}
    if embeddings.has_groups and embeddings.subset(TEST).n_rows:
        stage1 = test_diagnostics(embeddings, result.head)
        diagnostics['test'] = stage1.to_dict()
        logger.info(f"📊 Stage-1 test WGA {stage1.worst_group_accuracy:.4f}, mean {stage1.mean_accuracy:.4f}")
    write_json(diagnostics, run.path(STAGE1_DIAGNOSTICS))
    run.write_provenance('train-base', {'dataset': dataset.to_dict()})


@pipeline_command('reweight')
def reweight(run: RunContext):
    """Веса по схеме и переобучение головы на RW → head_afr.afrh, diagnostics.json, weights.csv"""
    config = run.config
    embeddings, stage1_head = run.load_stage1()
    rw = embeddings.subset(RW)
    groups = rw.require_groups()

    probs = predict_probs(stage1_head, rw.features)
    p_hat = correct_class_probs(probs, rw.labels)
    scheme = WeightScheme(kind=config['scheme.kind'], gamma=config['scheme.gamma'],
                          upweight_lambda=config['scheme.upweight_lambda'])
    mu = compute_weights(scheme, p_hat, rw.labels, correct=np.argmax(probs, axis=1) == rw.labels, groups=groups)
    aggregated = group_aggregated_weights(mu, groups, embeddings.n_groups)
    n_eff = effective_sample_size(mu)
    logger.info(f"📊 Weights: N_eff={n_eff:.1f} of {rw.n_rows}, group weights {np.round(aggregated, 4).tolist()}")

    train_config = config.train_config()
    report = train(stage1_head, rw.features, rw.labels, train_config, mu=mu, groups=groups,
                   validation=eval_set(embeddings, VAL), n_groups=embeddings.n_groups)
    write_head_file(report.head, run.path(AFR_HEAD))

    write_table(pd.DataFrame({
        'row': embeddings.split_indices(RW),
        'label': rw.labels,
        'group': groups,
        'p_hat': p_hat,
        'weight': mu,
    }), run.path(WEIGHTS_FILE))

    write_json({
        'stage1': test_diagnostics(embeddings, stage1_head).to_dict(),
        'retrained': test_diagnostics(embeddings, report.head).to_dict(),
        'n_eff': n_eff,
        'group_aggregated_weights': aggregated.tolist(),
        'scheme': scheme.to_dict(),
        'train_config': train_config.to_dict(),
        'selected_epoch': report.selected_epoch,
        'selected_val_wga': report.selected_val_wga,
    }, run.path(DIAGNOSTICS_FILE))


@pipeline_command('dfr')
def dfr(run: RunContext):
    """Базовая линия DFR: голова на сбалансированной по группам валидации → head_dfr.afrh"""
    embeddings, stage1_head = run.load_stage1()
    report = train_dfr(stage1_head, embeddings, run.config.dfr_config(), run.rng(DFR_KEY))
    write_head_file(report.head, run.path(DFR_HEAD))
    diagnostics = test_diagnostics(embeddings, report.head)
    logger.info(f"📊 DFR test WGA {diagnostics.worst_group_accuracy:.4f}")
    write_json({
        'stage1': test_diagnostics(embeddings, stage1_head).to_dict(),
        'retrained': diagnostics.to_dict(),
        'train_config': run.config.dfr_config().to_dict(),
        'final_loss': report.losses[-1],
    }, run.path(DFR_DIAGNOSTICS))
