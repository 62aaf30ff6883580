# -*- coding: utf-8 -*-
"""
Конфигурация: окружение (.env) и конфиг прогона.

Конфиг прогона: плоский файл `ключ = значение` с секциями через точку
(synthetic.n_total = 5000), комментарии через #. Читается python-dotenv.
"""
import os
from typing import Callable, Dict, Optional, Tuple

from dotenv import dotenv_values, load_dotenv

from afr.errors import ConfigError, InvalidInputError
from afr.models.dataset import SyntheticSpec
from afr.models.head import TrainConfig
from afr.models.mlp import BalanceConfig, ExtractorConfig

# Загружаем .env перед обращением к os.environ
load_dotenv()


class Config:
    """Базовая конфигурация"""

    DEFAULT_SEED = int(os.environ.get('AFR_SEED', 0))
    LOG_LEVEL = os.environ.get('AFR_LOG_LEVEL', 'INFO')
    JOBS = int(os.environ.get('AFR_JOBS', 1))
    RUN_DIR = os.environ.get('AFR_RUN_DIR', 'runs/default')

    # Переопределения значений по умолчанию для конфига прогона
    PIPELINE_DEFAULTS: Dict[str, str] = {}


class DevelopmentConfig(Config):
    """Конфигурация для разработки"""


class ProductionConfig(Config):
    """Конфигурация для продакшена"""


class TestingConfig(Config):
    """Конфигурация для тестирования: короткие прогоны"""
    LOG_LEVEL = 'WARNING'
    PIPELINE_DEFAULTS = {
        'synthetic.n_total': '1000',
        'synthetic.dims': '16',
        'synthetic.core_separation': '1.0',
        'extractor.hidden': '32,32',
        'extractor.batch_size': '64',
        'extractor.epochs': '10',
        'train.max_epochs': '100',
        'sweep.gammas': '0,4',
        'sweep.lambdas': '0',
        'sweep.learning_rates': '0.01',
        'label_efficiency.seeds': '0',
        'balance.steps': '50',
        'balance.hidden': '16,16',
        'plots.gammas': '0,4',
        'plots.seeds': '0',
        'dfr.max_epochs': '100',
    }


config_map = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
}


def get_config(config_name: Optional[str] = None):
    """Класс конфигурации по имени или переменной AFR_ENV"""
    if config_name is None:
        config_name = os.environ.get('AFR_ENV', 'development')
    return config_map.get(config_name, DevelopmentConfig)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ('true', '1', 'yes', 'on'):
        return True
    if lowered in ('false', '0', 'no', 'off'):
        return False
    raise ValueError(f"not a boolean: '{text}'")


def _list_of(cast: Callable) -> Callable:
    def parse(text: str) -> Tuple:
        items = [item.strip() for item in text.split(',') if item.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(cast(item) for item in items)
    return parse


def _format(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, tuple):
        return ','.join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


floats = _list_of(float)
ints = _list_of(int)

# Все допустимые ключи: (парсер, значение по умолчанию в текстовом виде)
RUN_FIELDS: Dict[str, Tuple[Callable, str]] = {
    'seed': (int, str(Config.DEFAULT_SEED)),
    'out': (str, Config.RUN_DIR),
    'jobs': (int, str(Config.JOBS)),
    'input': (str, ''),

    'synthetic.n_total': (int, '5000'),
    'synthetic.dims': (int, '32'),
    'synthetic.group_proportions': (floats, '0.73,0.04,0.01,0.22'),
    'synthetic.core_separation': (float, '0.75'),
    'synthetic.spurious_separation': (float, '3.0'),
    'synthetic.noise_std': (float, '1.0'),

    'split.erm_fraction': (float, '0.8'),
    'split.val_fraction': (float, '0.2'),
    'split.test_fraction': (float, '0.3'),
    'split.stratify': (_parse_bool, 'true'),

    'extractor.hidden': (ints, '64,64'),
    'extractor.epochs': (int, '400'),
    'extractor.learning_rate': (float, '0.05'),
    'extractor.batch_size': (int, '32'),

    'train.learning_rate': (float, '0.01'),
    'train.max_epochs': (int, '500'),
    'train.lambda': (float, '0.0'),
    'train.grad_clip_norm': (float, '1.0'),
    'train.early_stopping': (_parse_bool, 'true'),
    'train.objective': (str, 'afr'),

    'scheme.kind': (str, 'afr_exponential'),
    'scheme.gamma': (float, '4.0'),
    'scheme.upweight_lambda': (float, '5.0'),

    'sweep.gammas': (floats, '0,1,2,4,6,8'),
    'sweep.lambdas': (floats, '0,0.1,1'),
    'sweep.learning_rates': (floats, '0.01,0.1'),
    'sweep.validation_fraction': (float, '1.0'),
    'sweep.seeds': (ints, '0'),

    'label_efficiency.fractions': (floats, '0.05,0.25,1.0'),
    'label_efficiency.seeds': (ints, '0,1,2'),
    'label_efficiency.subsampled_early_stopping': (_parse_bool, 'false'),
    'label_efficiency.dfr': (_parse_bool, 'true'),

    'balance.hidden': (ints, '128,128'),
    'balance.steps': (int, '2000'),
    'balance.learning_rate': (float, '0.001'),

    'plots.gammas': (floats, '0,1,2,4,6,8'),
    'plots.seeds': (ints, '0,1,2'),
    'plots.validation_fraction': (float, '0.5'),

    'dfr.learning_rate': (float, '0.01'),
    'dfr.max_epochs': (int, '500'),
    'dfr.lambda': (float, '0.0'),
}


class RunConfig:
    """
    Разобранный конфиг прогона.

    Приоритет значений: RUN_FIELDS → PIPELINE_DEFAULTS класса конфигурации →
    файл → переопределения из командной строки.
    """

    def __init__(self, values: Dict):
        self.values = values

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Optional[Dict[str, str]] = None,
             base=None) -> 'RunConfig':
        """
        Чтение и проверка конфига.

        Args:
            path (str): Путь к файлу конфига (None: только значения по умолчанию)
            overrides (dict): Значения из командной строки (None пропускаются)
            base: Класс конфигурации (по умолчанию get_config())

        Returns:
            RunConfig: Типизированные значения
        """
        base = base or get_config()
        raw = {key: default for key, (_, default) in RUN_FIELDS.items()}
        raw.update(base.PIPELINE_DEFAULTS)

        if path is not None:
            if not os.path.isfile(path):
                raise ConfigError(f"config file not found: {path}", field='config')
            for key, value in dotenv_values(path).items():
                if key not in RUN_FIELDS:
                    raise ConfigError("unknown config key", field=key)
                if value is None:
                    raise ConfigError("missing value", field=key)
                raw[key] = value

        for key, value in (overrides or {}).items():
            if value is not None:
                raw[key] = str(value)

        values = {}
        for key, (parse, _) in RUN_FIELDS.items():
            try:
                values[key] = parse(raw[key])
            except ValueError as error:
                raise ConfigError(f"invalid value: {error}", field=key)
        config = cls(values)
        config.validate()
        return config

    def __getitem__(self, key: str):
        return self.values[key]

    def resolved_text(self) -> str:
        """Все ключи с итоговыми значениями в формате файла конфига"""
        return ''.join(f'{key} = {_format(self.values[key])}\n' for key in sorted(self.values))

    def _block(self, prefix: str) -> Dict:
        return {key[len(prefix) + 1:]: value for key, value in self.values.items() if key.startswith(prefix + '.')}

    def synthetic_spec(self) -> SyntheticSpec:
        block = self._block('synthetic')
        return SyntheticSpec(
            n_total=block['n_total'],
            dims=block['dims'],
            group_proportions=block['group_proportions'],
            core_separation=block['core_separation'],
            spurious_separation=block['spurious_separation'],
            noise_std=block['noise_std'],
            seed=self['seed'],
        )

    def extractor_config(self) -> ExtractorConfig:
        return ExtractorConfig(**self._block('extractor'))

    def train_config(self) -> TrainConfig:
        block = self._block('train')
        return TrainConfig(
            learning_rate=block['learning_rate'],
            max_epochs=block['max_epochs'],
            lam=block['lambda'],
            grad_clip_norm=block['grad_clip_norm'],
            early_stopping=block['early_stopping'],
            objective=block['objective'],
        )

    def dfr_config(self) -> TrainConfig:
        block = self._block('dfr')
        return TrainConfig(
            learning_rate=block['learning_rate'],
            max_epochs=block['max_epochs'],
            lam=block['lambda'],
            grad_clip_norm=self['train.grad_clip_norm'],
            early_stopping=False,
            objective='afr',
        )

    def balance_config(self) -> BalanceConfig:
        return BalanceConfig(**self._block('balance'))

    def validate(self):
        """Проверка области значений; ошибка называет поле"""
        for field, message in self.synthetic_spec().validate():
            raise ConfigError(message, field=f'synthetic.{field}')

        for key in ('split.erm_fraction', 'split.val_fraction', 'split.test_fraction'):
            if not 0 < self[key] < 1:
                raise ConfigError(f"must lie in (0, 1), got {self[key]}", field=key)
        if self['split.val_fraction'] + self['split.test_fraction'] >= 1:
            raise ConfigError("val_fraction + test_fraction must be below 1", field='split.val_fraction')

        if self['seed'] < 0:
            raise ConfigError(f"must be non-negative, got {self['seed']}", field='seed')
        if self['jobs'] < 1:
            raise ConfigError(f"must be at least 1, got {self['jobs']}", field='jobs')

        for key in ('sweep.validation_fraction', 'plots.validation_fraction'):
            if not 0 < self[key] <= 1:
                raise ConfigError(f"must lie in (0, 1], got {self[key]}", field=key)
        for fraction in self['label_efficiency.fractions']:
            if not 0 < fraction <= 1:
                raise ConfigError(f"must lie in (0, 1], got {fraction}",
                                  field='label_efficiency.fractions')
        for key in ('sweep.gammas', 'sweep.lambdas', 'plots.gammas'):
            if any(value < 0 for value in self[key]):
                raise ConfigError("entries must be non-negative", field=key)

        checks = (
            ('extractor', self.extractor_config),
            ('train', self.train_config),
            ('dfr', self.dfr_config),
            ('balance', self.balance_config),
        )
        for block, build in checks:
            try:
                build().validate()
            except InvalidInputError as error:
                raise ConfigError(str(error), field=block)

        from afr.utils.weights import WeightScheme
        try:
            WeightScheme(kind=self['scheme.kind'], gamma=self['scheme.gamma'],
                         upweight_lambda=self['scheme.upweight_lambda'])
        except InvalidInputError as error:
            raise ConfigError(str(error), field='scheme')
        return self

    def to_dict(self) -> Dict:
        return {key: list(value) if isinstance(value, tuple) else value for key, value in sorted(self.values.items())}
