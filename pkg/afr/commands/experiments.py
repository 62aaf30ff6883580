# -*- coding: utf-8 -*-
"""
Экспериментальные команды: перебор гиперпараметров, эффективность по меткам групп,
балансирующая сеть.
"""

import logging

from afr.commands import (
    BALANCE_KEY, BALANCE_NETWORK, BALANCE_TRAJECTORY, LABEL_EFFICIENCY_FILE, LABEL_EFFICIENCY_RUNS_FILE,
    SWEEP_FILE, RunContext, pipeline_command,
)
from afr.config import RunConfig
from afr.models.dataset import RW
from afr.utils.backprop import train_balance_learner
from afr.utils.file_io import write_mlp_file, write_table
from afr.utils.plot_data import trajectory_table
from afr.utils.sweep import SweepSpec, label_efficiency_curve, run_sweep, sweep_table
from afr.utils.trainer import predict_probs

logger = logging.getLogger(__name__)


def sweep_spec(config: RunConfig) -> SweepSpec:
    """SweepSpec из блоков sweep, scheme и train"""
    return SweepSpec(
        gammas=config['sweep.gammas'],
        lambdas=config['sweep.lambdas'],
        learning_rates=config['sweep.learning_rates'],
        scheme_kind=config['scheme.kind'],
        train_template=config.train_config(),
        validation_fraction=config['sweep.validation_fraction'],
        seeds=config['sweep.seeds'],
        upweight_lambda=config['scheme.upweight_lambda'],
    )


@pipeline_command('sweep')
def sweep(run: RunContext):
    """Перебор (γ, λ, learning rate) с выбором по валидационному WGA → sweep.csv"""
    embeddings, stage1_head = run.load_stage1()
    result = run_sweep(embeddings, stage1_head, sweep_spec(run.config), jobs=run.config['jobs'])
    write_table(sweep_table(result), run.path(SWEEP_FILE))
    best = result.best
    if best is not None:
        logger.info(f"📊 Selected trial test WGA {best.test_wga:.4f}")


@pipeline_command('label-efficiency')
def label_efficiency(run: RunContext):
    """Тестовый WGA AFR и DFR при доле валидации → label_efficiency.csv"""
    config = run.config
    embeddings, stage1_head = run.load_stage1()
    result = label_efficiency_curve(
        embeddings,
        stage1_head,
        sweep_spec(config),
        fractions=config['label_efficiency.fractions'],
        seeds=config['label_efficiency.seeds'],
        jobs=config['jobs'],
        subsampled_early_stopping=config['label_efficiency.subsampled_early_stopping'],
        dfr_config=config.dfr_config() if config['label_efficiency.dfr'] else None,
    )
    write_table(result.to_frame(), run.path(LABEL_EFFICIENCY_FILE))
    write_table(result.runs_frame(), run.path(LABEL_EFFICIENCY_RUNS_FILE))


@pipeline_command('balance-learner')
def balance_learner(run: RunContext):
    """Сеть f(p, y), выравнивающая групповые веса на RW → balance_learner.afrm и траектория"""
    embeddings, stage1_head = run.load_stage1()
    rw = embeddings.subset(RW)
    result = train_balance_learner(
        predict_probs(stage1_head, rw.features),
        rw.labels,
        rw.require_groups(),
        embeddings.n_groups,
        config=run.config.balance_config(),
        rng=run.rng(BALANCE_KEY),
    )
    write_mlp_file(result.mlp, run.path(BALANCE_NETWORK))
    write_table(trajectory_table(result.trajectory), run.path(BALANCE_TRAJECTORY))
    logger.info(f"📊 Final group weights {[round(float(w), 4) for w in result.final_weights]}")
