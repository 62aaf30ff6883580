# -*- coding: utf-8 -*-
"""
Общее для команд CLI: контекст прогона (конфиг + директория артефактов)
и обработка ошибок с кодами выхода.
"""

import json
import logging
import os
from typing import Dict

import click

from afr import __version__
from afr.config import RunConfig, get_config
from afr.errors import AfrError, MissingArtifactsError
from afr.models.dataset import EmbeddingDataset
from afr.utils.file_io import read_embedding_csv, read_embedding_file, read_head_file, read_json, write_json
from afr.utils.numerics import Rng

logger = logging.getLogger(__name__)

# Фиксированные имена артефактов
CONFIG_RESOLVED = 'config.resolved'
DATA_FILE = 'data.afre'
PROVENANCE_FILE = 'provenance.json'
STAGE1_NETWORK = 'stage1.afrm'
STAGE1_HEAD = 'stage1_head.afrh'
STAGE1_DIAGNOSTICS = 'stage1_diagnostics.json'
EMBEDDINGS_FILE = 'embeddings.afre'
AFR_HEAD = 'head_afr.afrh'
DIAGNOSTICS_FILE = 'diagnostics.json'
WEIGHTS_FILE = 'weights.csv'
SWEEP_FILE = 'sweep.csv'
LABEL_EFFICIENCY_FILE = 'label_efficiency.csv'
LABEL_EFFICIENCY_RUNS_FILE = 'label_efficiency_runs.csv'
BALANCE_NETWORK = 'balance_learner.afrm'
BALANCE_TRAJECTORY = 'balance_learner_trajectory.csv'
DFR_HEAD = 'head_dfr.afrh'
DFR_DIAGNOSTICS = 'dfr_diagnostics.json'
GAMMA_GROUP_WEIGHT = 'gamma_vs_group_weight.csv'
GAMMA_WGA_NEFF = 'gamma_vs_wga_neff.csv'

# Ключи дочерних генераторов
SPLIT_KEY = 1
EXTRACTOR_KEY = 2
BALANCE_KEY = 3
DFR_KEY = 4


class RunContext:
    """Конфиг прогона и директория артефактов"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out_dir = config['out']
        os.makedirs(self.out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def rng(self, key: int) -> Rng:
        return Rng(self.config['seed']).spawn(key)

    def require(self, *names: str):
        """Проверка наличия артефактов; иначе MissingArtifactsError со списком ожидаемых файлов"""
        missing = [name for name in names if not os.path.isfile(self.path(name))]
        if missing:
            raise MissingArtifactsError(self.out_dir, names, missing)

    def echo_config(self):
        with open(self.path(CONFIG_RESOLVED), 'w', encoding='utf-8') as f:
            f.write(self.config.resolved_text())

    def load_raw_data(self) -> EmbeddingDataset:
        """Сырые данные: config input (AFRE или CSV) или data.afre в директории прогона"""
        source = self.config['input']
        if source:
            if source.lower().endswith('.csv'):
                return read_embedding_csv(source)
            return read_embedding_file(source)
        self.require(DATA_FILE)
        return read_embedding_file(self.path(DATA_FILE))

    def load_stage1(self):
        """Кэшированные эмбеддинги и голова первой стадии"""
        self.require(EMBEDDINGS_FILE, STAGE1_HEAD)
        return read_embedding_file(self.path(EMBEDDINGS_FILE)), read_head_file(self.path(STAGE1_HEAD))

    def write_provenance(self, command: str, extra: Dict):
        """Запись о команде в provenance.json (записи других команд сохраняются)"""
        path = self.path(PROVENANCE_FILE)
        provenance = read_json(path) if os.path.isfile(path) else {}
        record = {
            'version': __version__,
            'seed': self.config['seed'],
            'config': self.config.to_dict(),
        }
        record.update(extra)
        provenance[command] = record
        write_json(provenance, path)


def pipeline_command(name: str):
    """
    Декоратор команды: загрузка конфига, эхо config.resolved, коды выхода
    и JSON-запись ошибки в stderr.
    Обёрнутая функция получает RunContext.
    """
    def decorator(func):
        @click.pass_context
        def wrapper(ctx):
            options = ctx.obj or {}
            try:
                config = RunConfig.load(options.get('config'), options.get('overrides'),
                                        base=get_config(options.get('env')))
                run = RunContext(config)
                run.echo_config()
                logger.info(f"🚀 {name}: run directory {run.out_dir}, seed {config['seed']}")
                func(run)
            except AfrError as error:
                logger.error(f"❌ {name} failed: {error}")
                record = {'command': name}
                record.update(error.to_dict())
                click.echo(json.dumps(record, ensure_ascii=False), err=True)
                ctx.exit(error.exit_code)
            logger.info(f"✅ {name} finished")
        return click.command(name, help=func.__doc__)(wrapper)
    return decorator
