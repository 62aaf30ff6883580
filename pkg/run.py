#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# run.py
"""
Точка входа AFR.
Запуск командной строки: python run.py --config configs/reference.cfg generate
"""

import logging

from afr.cli import cli
from afr.config import get_config

# Настройка логирования
logging.basicConfig(
    level=getattr(logging, get_config().LOG_LEVEL.upper(), logging.INFO),
    format='%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'
)

if __name__ == '__main__':
    cli()
