"""
Исключения TweedieLab
"""

from typing import Any, Dict, Optional


class TweedieLabError(Exception):
    """Базовое исключение библиотеки"""


class DomainError(TweedieLabError, ValueError):
    """Аргумент вне области определения (состояние, время, параметры процесса)"""


class ConfigError(TweedieLabError):
    """Ошибка конфигурации с указанием проблемного ключа"""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class NoSupportError(TweedieLabError):
    """Все веса важности обратились в ноль (нет носителя у апостериорного распределения)"""


class QuadratureError(TweedieLabError):
    """Квадратура не сошлась"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        super().__init__(f"{message} ({details})" if details else message)


class RankError(TweedieLabError):
    """Вырожденная система (слишком мало непустых бинов или столбцов)"""


class InversionError(TweedieLabError):
    """Не удалось найти скобку для обращения монотонной функции"""
