# -*- coding: utf-8 -*-
"""
Исключения пакета AFR.
Каждая ошибка знает свой код выхода для CLI и умеет превращаться в словарь:
CLI печатает его одной JSON-строкой в stderr при падении команды.
"""

from typing import Dict, List, Optional, Sequence


class AfrError(Exception):
    """Базовая ошибка пакета"""

    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_dict(self) -> Dict:
        return {
            'error': self.message,
            'type': type(self).__name__,
            'exit_code': self.exit_code,
        }


class ConfigError(AfrError):
    """Ошибка конфигурации запуска (неизвестный ключ, неверное значение)"""

    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field

    def to_dict(self) -> Dict:
        data = super().to_dict()
        data['field'] = self.field
        return data


class DataError(AfrError):
    """Ошибка данных: файлы, сплиты, размеры"""

    exit_code = 3


class InvalidInputError(DataError, ValueError):
    """Неверные аргументы библиотечной операции"""


class ParseError(DataError):
    """
    Ошибка разбора файла.

    Args:
        message (str): Описание проблемы
        offset (int): Смещение в байтах (для бинарных файлов) или номер строки CSV
        path (str): Путь к файлу, если известен
    """

    def __init__(self, message: str, offset: int, path: Optional[str] = None):
        where = f" in {path}" if path else ""
        super().__init__(f"{message} at offset {offset}{where}")
        self.offset = offset
        self.path = path

    def to_dict(self) -> Dict:
        data = super().to_dict()
        data['offset'] = self.offset
        return data


class MissingGroupsError(InvalidInputError):
    """В наборе для оценки нет примеров некоторых групп"""

    def __init__(self, missing: Sequence[int]):
        self.missing: List[int] = [int(g) for g in missing]
        super().__init__(f"groups absent from evaluation set: {self.missing}")

    def to_dict(self) -> Dict:
        data = super().to_dict()
        data['missing_groups'] = self.missing
        return data


class MissingArtifactsError(DataError):
    """В директории запуска не хватает файлов"""

    def __init__(self, run_dir: str, expected: Sequence[str], missing: Sequence[str]):
        self.expected = list(expected)
        self.missing = list(missing)
        super().__init__(
            f"run directory {run_dir} is missing {', '.join(self.missing)} "
            f"(expected: {', '.join(self.expected)})"
        )

    def to_dict(self) -> Dict:
        data = super().to_dict()
        data['expected'] = self.expected
        data['missing'] = self.missing
        return data


class DivergenceError(AfrError):
    """Обучение разошлось: loss стал NaN/Inf"""

    exit_code = 4

    def __init__(self, epoch: int, loss: float, where: str = "training"):
        super().__init__(f"{where} diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss

    def to_dict(self) -> Dict:
        data = super().to_dict()
        data['epoch'] = self.epoch
        return data
