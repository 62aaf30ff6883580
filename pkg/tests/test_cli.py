# -*- coding: utf-8 -*-
"""Тесты командной строки: полный конвейер в testing-окружении"""

import json
import os

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from afr.cli import cli
from afr.commands import (
    AFR_HEAD, BALANCE_NETWORK, BALANCE_TRAJECTORY, CONFIG_RESOLVED, DATA_FILE, DFR_DIAGNOSTICS, DFR_HEAD,
    DIAGNOSTICS_FILE, EMBEDDINGS_FILE, GAMMA_GROUP_WEIGHT, GAMMA_WGA_NEFF, LABEL_EFFICIENCY_FILE,
    LABEL_EFFICIENCY_RUNS_FILE, PROVENANCE_FILE, STAGE1_DIAGNOSTICS, STAGE1_HEAD, STAGE1_NETWORK, SWEEP_FILE,
    WEIGHTS_FILE,
)
from afr.utils.file_io import read_head_file, read_json
from afr.utils.sweep import LABEL_EFFICIENCY_COLUMNS, SWEEP_COLUMNS

BASE_STEPS = ('generate', 'train-base', 'reweight')


def invoke(out_dir, *args, config=None):
    options = ['--env', 'testing', '--out', str(out_dir)]
    if config is not None:
        options += ['--config', str(config)]
    return CliRunner().invoke(cli, options + list(args))


def error_record(result):
    """JSON-запись об ошибке, которую команда печатает в stderr"""
    for line in result.output.splitlines():
        if line.startswith('{'):
            return json.loads(line)
    raise AssertionError(f"no error record in output: {result.output}")


def run_steps(out_dir, steps, config=None):
    for step in steps:
        result = invoke(out_dir, step, config=config)
        assert result.exit_code == 0, f"{step} exited with {result.exit_code}: {result.output}"


def read_bytes(path):
    with open(path, 'rb') as f:
        return f.read()


@pytest.fixture(scope='module')
def run_dir(tmp_path_factory):
    """Директория с результатами всех команд"""
    out_dir = tmp_path_factory.mktemp('run')
    run_steps(out_dir, BASE_STEPS + ('balance-learner', 'plots', 'sweep', 'label-efficiency', 'dfr'))
    return out_dir


class TestExitCodes:

    def test_unknown_config_key(self, tmp_path):
        config = tmp_path / 'bad.cfg'
        config.write_text("train.momentum = 0.9\n", encoding='utf-8')
        result = invoke(tmp_path / 'run', 'generate', config=config)
        assert result.exit_code == 2
        record = error_record(result)
        assert record['command'] == 'generate'
        assert record['type'] == 'ConfigError'
        assert record['field'] == 'train.momentum'
        assert record['exit_code'] == 2

    def test_invalid_proportions(self, tmp_path):
        config = tmp_path / 'bad.cfg'
        config.write_text("synthetic.group_proportions = 0.5,0.5,0.5,0.5\n", encoding='utf-8')
        assert invoke(tmp_path / 'run', 'generate', config=config).exit_code == 2

    def test_missing_config_file(self, tmp_path):
        assert invoke(tmp_path / 'run', 'generate', config=tmp_path / 'absent.cfg').exit_code == 2

    @pytest.mark.parametrize('command', ['train-base', 'reweight', 'sweep', 'balance-learner', 'plots', 'dfr'])
    def test_missing_artifacts(self, tmp_path, command):
        assert invoke(tmp_path / 'empty', command).exit_code == 3

    def test_missing_artifacts_record(self, tmp_path):
        result = invoke(tmp_path / 'empty', 'reweight')
        record = error_record(result)
        assert record['type'] == 'MissingArtifactsError'
        assert record['exit_code'] == 3
        assert set(record['missing']) <= set(record['expected'])
        assert EMBEDDINGS_FILE in record['missing']

    def test_malformed_input(self, tmp_path):
        broken = tmp_path / 'broken.afre'
        broken.write_bytes(b'NOPE' + bytes(40))
        config = tmp_path / 'input.cfg'
        config.write_text(f"input = {broken}\n", encoding='utf-8')
        assert invoke(tmp_path / 'run', 'train-base', config=config).exit_code == 3

    def test_version(self):
        result = CliRunner().invoke(cli, ['--version'])
        assert result.exit_code == 0
        assert 'afr' in result.output


class TestPipeline:

    def test_artifacts_present(self, run_dir):
        expected = (
            CONFIG_RESOLVED, DATA_FILE, PROVENANCE_FILE, STAGE1_NETWORK, STAGE1_HEAD, STAGE1_DIAGNOSTICS,
            EMBEDDINGS_FILE, AFR_HEAD, DIAGNOSTICS_FILE, WEIGHTS_FILE, SWEEP_FILE, LABEL_EFFICIENCY_FILE,
            LABEL_EFFICIENCY_RUNS_FILE, BALANCE_NETWORK, BALANCE_TRAJECTORY, DFR_HEAD, DFR_DIAGNOSTICS,
            GAMMA_GROUP_WEIGHT, GAMMA_WGA_NEFF,
        )
        missing = [name for name in expected if not os.path.isfile(os.path.join(run_dir, name))]
        assert missing == []

    def test_provenance_records_commands(self, run_dir):
        provenance = read_json(os.path.join(run_dir, PROVENANCE_FILE))
        assert {'generate', 'train-base'} <= set(provenance)
        assert provenance['generate']['dataset']['n_rows'] == 1000
        assert provenance['generate']['seed'] == 0

    def test_config_resolved(self, run_dir):
        with open(os.path.join(run_dir, CONFIG_RESOLVED), encoding='utf-8') as f:
            lines = f.read().splitlines()
        assert 'synthetic.n_total = 1000' in lines
        assert f'out = {run_dir}' in lines

    def test_weights_table(self, run_dir):
        weights = pd.read_csv(os.path.join(run_dir, WEIGHTS_FILE))
        assert list(weights.columns) == ['row', 'label', 'group', 'p_hat', 'weight']
        assert abs(weights['weight'].sum() - 1.0) < 1e-9
        assert (weights['weight'] > 0).all()
        assert ((weights['p_hat'] > 0) & (weights['p_hat'] < 1)).all()
        np.testing.assert_array_equal(weights['group'] // 2, weights['label'])

    def test_diagnostics(self, run_dir):
        with open(os.path.join(run_dir, DIAGNOSTICS_FILE), encoding='utf-8') as f:
            diagnostics = json.load(f)
        for key in ('stage1', 'retrained'):
            report = diagnostics[key]
            assert len(report['per_group_accuracy']) == 4
            assert report['worst_group_accuracy'] == min(report['per_group_accuracy'])
        assert abs(sum(diagnostics['group_aggregated_weights']) - 1.0) < 1e-9
        assert 1.0 <= diagnostics['n_eff'] <= sum(pd.read_csv(os.path.join(run_dir, WEIGHTS_FILE))['weight'] > 0)

    def test_heads_share_anchor(self, run_dir):
        stage1 = read_head_file(os.path.join(run_dir, STAGE1_HEAD))
        retrained = read_head_file(os.path.join(run_dir, AFR_HEAD))
        np.testing.assert_array_equal(retrained.anchor_weights, stage1.weights)
        assert retrained.weights.shape == stage1.weights.shape

    def test_sweep_table(self, run_dir):
        table = pd.read_csv(os.path.join(run_dir, SWEEP_FILE))
        assert list(table.columns) == SWEEP_COLUMNS
        assert sorted(table['gamma'].tolist()) == [0.0, 4.0]

    def test_label_efficiency_table(self, run_dir):
        table = pd.read_csv(os.path.join(run_dir, LABEL_EFFICIENCY_FILE))
        assert list(table.columns) == LABEL_EFFICIENCY_COLUMNS
        assert table['dfr_test_wga_mean'].between(0.0, 1.0).all()
        assert table['fraction'].tolist() == [0.05, 0.25, 1.0]

    def test_plot_tables(self, run_dir):
        weights = pd.read_csv(os.path.join(run_dir, GAMMA_GROUP_WEIGHT))
        assert list(weights.columns) == ['gamma', 'group', 'aggregated_weight']
        np.testing.assert_allclose(weights.groupby('gamma')['aggregated_weight'].sum(), 1.0, atol=1e-9)

        neff = pd.read_csv(os.path.join(run_dir, GAMMA_WGA_NEFF))
        assert list(neff.columns) == ['gamma', 'test_wga_mean', 'test_wga_std', 'n_eff']
        assert neff['gamma'].tolist() == [0.0, 4.0]

        trajectory = pd.read_csv(os.path.join(run_dir, BALANCE_TRAJECTORY))
        assert list(trajectory.columns) == ['step', 'group', 'aggregated_weight']
        assert trajectory['step'].max() == 50
        np.testing.assert_allclose(trajectory.groupby('step')['aggregated_weight'].sum(), 1.0, atol=1e-9)

    def test_dfr_diagnostics(self, run_dir):
        diagnostics = read_json(os.path.join(run_dir, DFR_DIAGNOSTICS))
        assert diagnostics['train_config']['early_stopping'] is False
        assert len(diagnostics['retrained']['per_group_accuracy']) == 4


class TestDeterminism:

    def test_rerun_is_bit_identical(self, tmp_path):
        first, second = tmp_path / 'first', tmp_path / 'second'
        run_steps(first, BASE_STEPS)
        run_steps(second, BASE_STEPS)
        for name in (DATA_FILE, STAGE1_NETWORK, STAGE1_HEAD, EMBEDDINGS_FILE, AFR_HEAD, WEIGHTS_FILE,
                     DIAGNOSTICS_FILE):
            assert read_bytes(first / name) == read_bytes(second / name), name

    def test_gamma_zero_matches_class_balanced(self, tmp_path):
        out_dir = tmp_path / 'run'
        run_steps(out_dir, BASE_STEPS[:2])

        gamma_zero = tmp_path / 'gamma_zero.cfg'
        gamma_zero.write_text("scheme.kind = afr_exponential\nscheme.gamma = 0\n", encoding='utf-8')
        balanced = tmp_path / 'balanced.cfg'
        balanced.write_text("scheme.kind = class_balanced\n", encoding='utf-8')

        run_steps(out_dir, ['reweight'], config=gamma_zero)
        first = read_bytes(out_dir / AFR_HEAD)
        run_steps(out_dir, ['reweight'], config=balanced)
        assert read_bytes(out_dir / AFR_HEAD) == first
