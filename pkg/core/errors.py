# core/errors.py
"""
Иерархия ошибок BiMemLab.

Ядро (core/*) только выбрасывает эти исключения, сервисы ловят их,
логируют и превращают в код выхода (exit_code).
"""

from typing import Optional


class SimulationError(Exception):
    """Базовая ошибка лаборатории."""
    exit_code: int = 3

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


# =============================================================================
# ПАРАМЕТРЫ И ЯДРА
# =============================================================================

class ParameterDomainError(SimulationError):
    """Параметр вне области определения (d ≤ 0, q ≤ 0, p ≤ 1, n < 1...)."""
    exit_code = 2


class AdmissibilityError(ParameterDomainError):
    """Ядро не удовлетворяет условиям допустимости (например q2 ≤ 3)."""


# =============================================================================
# СЕТКИ И СОСТОЯНИЕ
# =============================================================================

class ResolutionError(SimulationError):
    """Слишком мало внутренних узлов для шаблонов."""
    exit_code = 2


class ShapeError(SimulationError):
    """Поле не соответствует сетке."""


class ConfigurationError(SimulationError):
    """Несогласованные настройки (например dt не совпадает с шагом s-сетки)."""
    exit_code = 2


class StateError(SimulationError):
    """Недостаточно данных в буфере или снимках."""


class NumericError(SimulationError):
    """Расходимость или срыв решателя."""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


# =============================================================================
# АНАЛИЗ ЗАТУХАНИЯ
# =============================================================================

class DataError(SimulationError):
    """Неположительная энергия в окне подгонки."""


class WindowError(SimulationError):
    """Слишком мало записей в окне подгонки."""


# =============================================================================
# ФАЙЛ ЭКСПЕРИМЕНТА
# =============================================================================

class ConfigParseError(SimulationError):
    """Отсутствующий, неизвестный или нечитаемый ключ."""
    exit_code = 2


class ValidationError(SimulationError):
    """Значение ключа вне допустимого диапазона."""
    exit_code = 2
