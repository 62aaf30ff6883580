# -*- coding: utf-8 -*-
"""
Экспорт данных для графиков из директории прогона.
"""

import logging
import os

import pandas as pd

from afr.commands import (
    BALANCE_TRAJECTORY, GAMMA_GROUP_WEIGHT, GAMMA_WGA_NEFF,
    RunContext, pipeline_command,
)
from afr.errors import ParseError
from afr.utils.file_io import write_table
from afr.utils.plot_data import gamma_group_weight_table, gamma_wga_neff_table, read_trajectory, trajectory_table
from afr.utils.sweep import SweepSpec
from afr.utils.weights import AFR_EXPONENTIAL, FOCAL, POWER

logger = logging.getLogger(__name__)


@pipeline_command('plots')
def plots(run: RunContext):
    """Таблицы γ → групповые веса, γ → WGA и N_eff, траектория балансирующей сети"""
    config = run.config
    embeddings, stage1_head = run.load_stage1()

    kind = config['scheme.kind']
    if kind not in (AFR_EXPONENTIAL, FOCAL, POWER):
        logger.warning(f"⚠️ scheme {kind} does not depend on gamma, plotting {AFR_EXPONENTIAL} instead")
        kind = AFR_EXPONENTIAL

    weights = gamma_group_weight_table(embeddings, stage1_head, config['plots.gammas'], kind)
    write_table(weights, run.path(GAMMA_GROUP_WEIGHT))

    spec = SweepSpec(
        gammas=config['plots.gammas'],
        lambdas=(0.0,),
        learning_rates=config['sweep.learning_rates'],
        scheme_kind=kind,
        train_template=config.train_config(),
        validation_fraction=config['plots.validation_fraction'],
        seeds=config['plots.seeds'],
        upweight_lambda=config['scheme.upweight_lambda'],
    )
    write_table(gamma_wga_neff_table(embeddings, stage1_head, spec, jobs=config['jobs']), run.path(GAMMA_WGA_NEFF))

    trajectory_path = run.path(BALANCE_TRAJECTORY)
    if not os.path.isfile(trajectory_path):
        logger.warning(f"⚠️ {BALANCE_TRAJECTORY} not found, run balance-learner to export the trajectory")
        return
    try:
        trajectory = read_trajectory(pd.read_csv(trajectory_path))
    except (KeyError, ValueError) as error:
        raise ParseError(f"malformed trajectory table: {error}", 1, trajectory_path)
    write_table(trajectory_table(trajectory), trajectory_path)
