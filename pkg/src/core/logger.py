import logging
import sys
import os
from logging.handlers import RotatingFileHandler
from typing import Optional

from colorlog import ColoredFormatter

from .config import Settings


def setup_logger(name: str = 'TweedieLab', log_level: Optional[str] = None,
                 log_dir: Optional[str] = None, to_file: Optional[bool] = None) -> logging.Logger:
    """
    Настройка логгера для проекта

    Дочерние логгеры библиотеки (TweedieLab.Process, TweedieLab.Sampler, ...)
    наследуют обработчики этого логгера.

    Args:
        name: имя логгера
        log_level: уровень логирования (по умолчанию Settings.LOG_LEVEL)
        log_dir: папка для логов (по умолчанию Settings.LOG_DIR)
        to_file: писать ли логи в файлы (по умолчанию Settings.LOG_TO_FILE)

    Returns:
        Объект логгера
    """
    log_level = log_level or Settings.LOG_LEVEL
    log_dir = log_dir or Settings.LOG_DIR
    to_file = Settings.LOG_TO_FILE if to_file is None else to_file

    # Преобразуем строковый уровень в числовой
    level = getattr(logging, log_level.upper(), logging.INFO)

    logger = logging.getLogger(name)

    # Проверяем, нет ли уже обработчиков
    if logger.handlers:
        return logger

    logger.setLevel(level)

    # Цветной форматтер для консоли
    console_formatter = ColoredFormatter(
        '%(log_color)s%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'red,bg_white',
        }
    )

    # Консольный обработчик
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(level)
    console_handler.setFormatter(console_formatter)
    logger.addHandler(console_handler)

    if to_file:
        # Создаем папку для логов если ее нет
        os.makedirs(log_dir, exist_ok=True)

        # Форматтер для файла
        file_formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        # Файловый обработчик для полных логов (с ротацией)
        full_log_handler = RotatingFileHandler(
            os.path.join(log_dir, 'tweedie_lab_full.log'),
            maxBytes=10 * 1024 * 1024,  # 10 MB
            backupCount=5,
            encoding='utf-8'
        )
        full_log_handler.setLevel(logging.DEBUG)
        full_log_handler.setFormatter(file_formatter)

        # Стандартный файловый обработчик
        file_handler = RotatingFileHandler(
            os.path.join(log_dir, 'tweedie_lab.log'),
            maxBytes=10 * 1024 * 1024,  # 10 MB
            backupCount=5,
            encoding='utf-8'
        )
        file_handler.setLevel(level)
        file_handler.setFormatter(file_formatter)

        logger.addHandler(file_handler)
        logger.addHandler(full_log_handler)
        # Полный лог должен получать DEBUG
        logger.setLevel(logging.DEBUG)

    # Предотвращаем распространение на корневой логгер
    logger.propagate = False

    return logger
