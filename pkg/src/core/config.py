import math
import os
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Union

from dotenv import dotenv_values, load_dotenv

from .errors import ConfigError

load_dotenv()


class Settings:
    """Настройки приложения из переменных окружения"""

    # Настройки логирования
    LOG_LEVEL: str = os.getenv('LOG_LEVEL', 'INFO')
    LOG_DIR: str = os.getenv('LOG_DIR', 'logs')
    LOG_TO_FILE: bool = os.getenv('LOG_TO_FILE', 'true').lower() == 'true'

    # Вычисления
    DEFAULT_THREADS: int = int(os.getenv('DEFAULT_THREADS', '1'))
    MC_BATCH_SIZE: int = int(os.getenv('MC_BATCH_SIZE', '256'))
    ESS_WARNING: float = float(os.getenv('ESS_WARNING', '50'))

    @classmethod
    def validate(cls):
        """Проверка настроек"""
        valid_levels = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
        if cls.LOG_LEVEL.upper() not in valid_levels:
            raise ValueError(f"Неверный уровень логирования. Допустимые значения: {valid_levels}")

        if cls.DEFAULT_THREADS < 1:
            raise ValueError("DEFAULT_THREADS должен быть не меньше 1")

        if cls.MC_BATCH_SIZE < 1:
            raise ValueError("MC_BATCH_SIZE должен быть не меньше 1")

        if cls.ESS_WARNING < 0:
            raise ValueError("ESS_WARNING не может быть отрицательным")

    @classmethod
    def print_settings(cls):
        """Выводит текущие настройки"""
        settings = {
            'LOG_LEVEL': cls.LOG_LEVEL,
            'LOG_DIR': cls.LOG_DIR,
            'LOG_TO_FILE': cls.LOG_TO_FILE,
            'DEFAULT_THREADS': cls.DEFAULT_THREADS,
            'MC_BATCH_SIZE': cls.MC_BATCH_SIZE,
            'ESS_WARNING': cls.ESS_WARNING,
        }

        return "\n".join([f"{k}: {v}" for k, v in settings.items()])


_TRUE = {'true', '1', 'yes', 'on'}
_FALSE = {'false', '0', 'no', 'off'}


class RunConfig(Mapping[str, Optional[str]]):
    """
    Конфигурация эксперимента: плоский файл key=value с точечными секциями

    Пример:
        process.family=besq
        process.nu=0.5
        prior.kind=point_mass
        prior.value=1.0
        check.t=0.5,1.0
    """

    def __init__(self, values: Mapping[str, Optional[str]], path: Optional[str] = None):
        self._values: Dict[str, Optional[str]] = {k.strip(): (v.strip() if v is not None else None)
                                                  for k, v in values.items()}
        self.path = path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'RunConfig':
        """Чтение файла конфигурации (без подстановки переменных)"""
        path = Path(path)
        if not path.is_file():
            raise ConfigError('config', f"файл не найден: {path}")
        return cls(dotenv_values(path, interpolate=False), str(path))

    def __getitem__(self, key: str) -> Optional[str]:
        return self._values[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def with_overrides(self, overrides: Mapping[str, str]) -> 'RunConfig':
        merged = dict(self._values)
        merged.update(overrides)
        return RunConfig(merged, self.path)

    def _raw(self, key: str, default: Optional[str]) -> str:
        value = self._values.get(key)
        if value is None or value == '':
            if default is None:
                raise ConfigError(key, "обязательный ключ отсутствует")
            return default
        return value

    def get_str(self, key: str, default: Optional[str] = None) -> str:
        return self._raw(key, default)

    def get_float(self, key: str, default: Optional[float] = None) -> float:
        raw = self._raw(key, None if default is None else repr(float(default)))
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(key, f"ожидалось число, получено '{raw}'")
        if math.isnan(value):
            raise ConfigError(key, "значение NaN недопустимо")
        return value

    def get_int(self, key: str, default: Optional[int] = None) -> int:
        raw = self._raw(key, None if default is None else str(int(default)))
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(key, f"ожидалось целое число, получено '{raw}'")

    def get_floats(self, key: str, default: Optional[List[float]] = None) -> List[float]:
        raw = self._raw(key, None if default is None else ','.join(repr(float(v)) for v in default))
        try:
            values = [float(item) for item in raw.split(',') if item.strip()]
        except ValueError:
            raise ConfigError(key, f"ожидался список чисел через запятую, получено '{raw}'")
        if not values:
            raise ConfigError(key, "пустой список")
        return values

    def get_bool(self, key: str, default: Optional[bool] = None) -> bool:
        raw = self._raw(key, None if default is None else str(bool(default)).lower()).lower()
        if raw in _TRUE:
            return True
        if raw in _FALSE:
            return False
        raise ConfigError(key, f"ожидалось true/false, получено '{raw}'")

    def section(self, prefix: str) -> Dict[str, Optional[str]]:
        """Ключи с префиксом 'prefix.' (префикс сохраняется)"""
        head = f'{prefix}.'
        return {k: v for k, v in self._values.items() if k.startswith(head)}

    def to_lines(self) -> List[str]:
        """Строки key=value в порядке ключей, для заголовков артефактов"""
        return [f"{k}={'' if v is None else v}" for k, v in sorted(self._values.items())]
