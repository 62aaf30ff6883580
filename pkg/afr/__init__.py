# -*- coding: utf-8 -*-
"""
AFR: переобучение последнего слоя с автоматическим перевзвешиванием признаков.
"""

import json
import logging
import os

logger = logging.getLogger(__name__)

MANIFEST_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'manifest.json')


def get_version() -> str:
    """Версия из manifest.json (на уровень выше пакета)"""
    try:
        with open(MANIFEST_PATH, 'r', encoding='utf-8') as f:
            return json.load(f).get('version', '0.0.0')
    except FileNotFoundError:
        logger.warning("⚠️ manifest.json not found")
        return '0.0.0'
    except json.JSONDecodeError as e:
        logger.error(f"Invalid JSON in manifest.json: {str(e)}")
        return '0.0.0'


__version__ = get_version()
