# -*- coding: utf-8 -*-
"""Сквозной прогон эталонной конфигурации (медленный)"""

import os
from dataclasses import replace

import pandas as pd
import pytest
from click.testing import CliRunner

from afr.cli import cli
from afr.commands import EMBEDDINGS_FILE, LABEL_EFFICIENCY_FILE, STAGE1_DIAGNOSTICS, STAGE1_HEAD, SWEEP_FILE
from afr.commands.experiments import sweep_spec
from afr.config import DevelopmentConfig, RunConfig
from afr.utils.file_io import read_embedding_file, read_head_file, read_json
from afr.utils.sweep import run_sweep
from afr.utils.weights import ORACLE_GROUP_BALANCED

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
REFERENCE_CONFIG = os.path.join(ROOT, 'configs', 'reference.cfg')


@pytest.fixture(scope='module')
def reference_run(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp('reference')
    runner = CliRunner()
    for step in ('generate', 'train-base', 'sweep', 'label-efficiency'):
        result = runner.invoke(cli, ['--env', 'development', '--config', REFERENCE_CONFIG, '--out', str(out_dir), step])
        assert result.exit_code == 0, f"{step} exited with {result.exit_code}"
    return out_dir


def stage1_report(run_dir):
    return read_json(os.path.join(run_dir, STAGE1_DIAGNOSTICS))


def best_by_validation(table):
    """Строка с первым максимумом валидационного WGA"""
    return table.loc[table['val_wga'].idxmax()]


@pytest.mark.slow
class TestReferenceRun:

    def test_stage1_fits_its_training_split(self, reference_run):
        assert stage1_report(reference_run)['train_accuracy'] >= 0.99

    def test_stage1_relies_on_spurious_feature(self, reference_run):
        stage1 = stage1_report(reference_run)['test']
        assert stage1['worst_group_accuracy'] <= 0.70
        assert stage1['mean_accuracy'] > 0.8

    def test_reweighting_improves_worst_group(self, reference_run):
        stage1_wga = stage1_report(reference_run)['test']['worst_group_accuracy']
        sweep = pd.read_csv(os.path.join(reference_run, SWEEP_FILE))
        assert (sweep['status'] == 'ok').all()
        assert best_by_validation(sweep)['test_wga'] >= stage1_wga + 0.10

    def test_selected_gamma_beats_gamma_zero(self, reference_run):
        sweep = pd.read_csv(os.path.join(reference_run, SWEEP_FILE))
        best = best_by_validation(sweep)
        gamma_zero = best_by_validation(sweep[sweep['gamma'] == 0.0])
        assert best['gamma'] > 0
        assert best['test_wga'] > gamma_zero['test_wga']

    def test_group_balanced_weights_are_at_least_as_good(self, reference_run):
        config = RunConfig.load(REFERENCE_CONFIG, base=DevelopmentConfig)
        embeddings = read_embedding_file(os.path.join(reference_run, EMBEDDINGS_FILE))
        stage1_head = read_head_file(os.path.join(reference_run, STAGE1_HEAD))
        oracle = run_sweep(embeddings, stage1_head, replace(sweep_spec(config), scheme_kind=ORACLE_GROUP_BALANCED))

        sweep = pd.read_csv(os.path.join(reference_run, SWEEP_FILE))
        assert oracle.best.test_wga >= best_by_validation(sweep)['test_wga'] - 0.03

    def test_label_efficiency_above_stage1(self, reference_run):
        stage1_wga = stage1_report(reference_run)['test']['worst_group_accuracy']
        curve = pd.read_csv(os.path.join(reference_run, LABEL_EFFICIENCY_FILE))
        assert curve['fraction'].tolist() == [0.05, 0.25, 1.0]
        assert (curve['n_trials'] == 3).all()
        assert (curve['test_wga_mean'] > stage1_wga).all()
