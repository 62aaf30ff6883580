# -*- coding: utf-8 -*-
"""
Командная строка AFR: группа click и регистрация команд.

Глобальные флаги --config, --seed, --out, --jobs переопределяют значения файла конфига.
Коды выхода: 0 успех, 2 ошибка конфига, 3 ошибка данных, 4 расхождение обучения.
"""

import logging

import click

from afr import __version__

logger = logging.getLogger(__name__)


@click.group()
@click.version_option(__version__, prog_name='afr')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='Файл конфига прогона (key = value)')
@click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=None, help='Глобальный seed')
@click.option('--out', type=click.Path(file_okay=False), default=None, help='Директория артефактов')
@click.option('--jobs', type=click.IntRange(min=1), default=None, help='Потоки для проб перебора')
@click.option('--env', type=click.Choice(['development', 'production', 'testing']), default=None,
              help='Класс конфигурации (по умолчанию AFR_ENV)')
@click.pass_context
def cli(ctx, config_path, seed, out, jobs, env):
    """Automatic Feature Reweighting: переобучение последнего слоя с весами по ERM-модели"""
    ctx.obj = {
        'config': config_path,
        'env': env,
        'overrides': {'seed': seed, 'out': out, 'jobs': jobs},
    }


def register_commands(group: click.Group):
    """Регистрация команд из модулей afr.commands"""
    from afr.commands.pipeline import generate, train_base, reweight, dfr
    from afr.commands.experiments import sweep, label_efficiency, balance_learner
    from afr.commands.plots import plots

    for command in (generate, train_base, reweight, sweep, label_efficiency, balance_learner, plots, dfr):
        group.add_command(command)


register_commands(cli)
