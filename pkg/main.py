#!/usr/bin/env python3
"""
Главный модуль TweedieLab - Точка входа в приложение
"""

import os
import sys
import argparse
import logging
from dotenv import load_dotenv

# Добавляем путь к корневой директории проекта
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src import __version__
from src.core.logger import setup_logger
from tweedie_lab import TweedieLab, EXIT_ERROR

COMMANDS = ['score-check', 'generate', 'dsm-fit', 'eb-run']


def parse_arguments(argv=None):
    """Парсинг аргументов командной строки"""
    parser = argparse.ArgumentParser(description='TweedieLab - Tweedie scores for non-Gaussian diffusions')
    parser.add_argument('command', choices=COMMANDS, help='Подкоманда')
    parser.add_argument('--config', type=str, required=True, help='Файл конфигурации key=value')
    parser.add_argument('--seed', type=int, default=0, help='Зерно генератора (неотрицательное)')
    parser.add_argument('--out', type=str, default='out', help='Папка для результатов')
    parser.add_argument('--threads', type=int, help='Число потоков (на результат не влияет)')
    parser.add_argument('--version', action='version', version=f'TweedieLab {__version__}')

    return parser.parse_args(argv)


def main(argv=None) -> int:
    """Главная функция приложения"""
    # Загрузка переменных окружения
    load_dotenv()

    # Настройка логирования
    setup_logger()
    logger = logging.getLogger('TweedieLab')

    # Парсинг аргументов командной строки
    args = parse_arguments(argv)

    if args.threads is not None and args.threads < 1:
        logger.error("❌ --threads должен быть не меньше 1")
        return EXIT_ERROR

    try:
        lab = TweedieLab(out_dir=args.out, seed=args.seed, threads=args.threads)
        return lab.run(args.command, args.config)
    except KeyboardInterrupt:
        logger.info("⚠️ Прервано пользователем (Ctrl+C)")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
