#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Скрипт проверки окружения и директории прогона (healthcheck).

Использование:
    python scripts/healthcheck.py [RUN_DIR]

Возвращает:
    0 - все проверки пройдены
    1 - обнаружены проблемы
"""

import os
import sys
from pathlib import Path

# Добавляем корневую папку проекта в sys.path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))


def check_env_file():
    """Проверка наличия .env файла (необязателен)"""
    env_path = project_root / '.env'
    if not env_path.exists():
        return True, "⚠️  .env file not found, using built-in defaults"
    return True, "✅ .env file exists"


def check_dependencies():
    """Проверка установленных зависимостей"""
    required_packages = ['numpy', 'scipy', 'pandas', 'click', 'dotenv']

    issues = []
    for package in required_packages:
        try:
            __import__(package)
            issues.append(f"✅ {package}")
        except ImportError:
            issues.append(f"❌ {package} not installed")

    has_errors = any('❌' in issue for issue in issues)
    return not has_errors, '\n'.join(issues)


def check_config():
    """Разбор конфигов из configs/ и значений по умолчанию"""
    try:
        from afr.config import RunConfig, get_config
        from afr.errors import ConfigError
    except ImportError as e:
        return False, f"❌ Cannot import afr: {str(e)}"

    issues = []
    try:
        RunConfig.load(None)
        issues.append(f"✅ Default run config is valid ({get_config().__name__})")
    except ConfigError as e:
        issues.append(f"❌ Default run config: {e}")

    for path in sorted((project_root / 'configs').glob('*.cfg')):
        try:
            RunConfig.load(str(path))
            issues.append(f"✅ {path.name}")
        except ConfigError as e:
            issues.append(f"❌ {path.name}: {e}")

    has_errors = any('❌' in issue for issue in issues)
    return not has_errors, '\n'.join(issues)


def check_numerics():
    """Воспроизводимость генератора и устойчивость softmax"""
    import numpy as np
    from afr.utils.numerics import Rng, softmax_rows

    first = Rng(42).normal(5)
    second = Rng(42).normal(5)
    if not np.array_equal(first, second):
        return False, "❌ Rng is not reproducible"
    probs = softmax_rows([[1000.0, 0.0], [-1000.0, 0.0]])
    if not np.allclose(probs.sum(axis=1), 1.0):
        return False, "❌ softmax rows do not sum to 1"
    return True, "✅ Rng reproducible, softmax stable"


def check_run_dir(run_dir):
    """Читаемость артефактов директории прогона"""
    from afr.errors import AfrError
    from afr.utils.file_io import read_embedding_file, read_head_file, read_mlp_file

    if not os.path.isdir(run_dir):
        return True, f"⚠️  Run directory {run_dir} does not exist yet"

    issues = []
    readers = {
        'data.afre': read_embedding_file,
        'embeddings.afre': read_embedding_file,
        'stage1_head.afrh': read_head_file,
        'head_afr.afrh': read_head_file,
        'stage1.afrm': read_mlp_file,
        'balance_learner.afrm': lambda path: read_mlp_file(path, output_transform='softplus'),
    }
    for name, reader in readers.items():
        path = os.path.join(run_dir, name)
        if not os.path.isfile(path):
            issues.append(f"⚠️  {name} not found")
            continue
        try:
            reader(path)
            issues.append(f"✅ {name}")
        except AfrError as e:
            issues.append(f"❌ {name}: {e}")

    has_errors = any('❌' in issue for issue in issues)
    return not has_errors, '\n'.join(issues)


def main(argv=None):
    """Главная функция проверки"""
    argv = sys.argv[1:] if argv is None else argv
    run_dir = argv[0] if argv else os.environ.get('AFR_RUN_DIR', 'runs/default')

    print("=" * 60)
    print("🏥 AFR - HEALTH CHECK")
    print("=" * 60)
    print()

    checks = [
        ("Environment File", check_env_file),
        ("Dependencies", check_dependencies),
        ("Configuration", check_config),
        ("Numerics", check_numerics),
        ("Run Directory", lambda: check_run_dir(run_dir)),
    ]

    results = []
    all_passed = True

    for check_name, check_func in checks:
        print(f"📋 Checking {check_name}...")
        try:
            passed, message = check_func()
            results.append((check_name, passed, message))
            print(f"   {message}")
            if not passed:
                all_passed = False
        except Exception as e:
            results.append((check_name, False, f"❌ Unexpected error: {str(e)}"))
            print(f"   ❌ Unexpected error: {str(e)}")
            all_passed = False
        print()

    # Итоговый отчет
    print("=" * 60)
    print("📊 SUMMARY")
    print("=" * 60)

    passed_count = sum(1 for _, passed, _ in results if passed)
    for check_name, passed, _ in results:
        status = "✅ PASS" if passed else "❌ FAIL"
        print(f"{status} - {check_name}")

    print()
    print(f"Result: {passed_count}/{len(results)} checks passed")

    if all_passed:
        print("\n✅ All checks passed!")
        return 0
    print("\n❌ Some checks failed. Please review the issues above.")
    return 1


if __name__ == "__main__":
    sys.exit(main())
