# profiles/history.py
"""
Профили истории y0(x, t), t ≥ 0, с разделёнными переменными:
y0(x, t) = φ(x) h(t), где φ - начальное поле.
Вызов history(points, taus) возвращает массив (len(taus), n).
"""

import numpy as np


class HistoryProfile:
    name: str = "HistoryProfile"

    def __init__(self, base_field: np.ndarray, rate: float = 1.0):
        self.base = np.asarray(base_field, dtype=complex)
        self.rate = float(rate)

    def time_factor(self, taus: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def time_factor_tt(self, taus: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False

    def __call__(self, points: np.ndarray, taus: np.ndarray) -> np.ndarray:
        return np.outer(self.time_factor(np.asarray(taus, dtype=float)), self.base)

    def second_derivative(self, points: np.ndarray, taus: np.ndarray) -> np.ndarray:
        """∂²_τ y0(x, τ)"""
        return np.outer(self.time_factor_tt(np.asarray(taus, dtype=float)), self.base)

    def as_callable(self):
        return None if self.is_zero else self

    def second_derivative_callable(self):
        return None if self.is_zero else self.second_derivative

    def describe(self) -> str:
        return self.name


class ZeroHistory(HistoryProfile):
    """y0(x, t) = 0 для t > 0 (система стартует из покоя в прошлом)."""
    name = "zero"

    @property
    def is_zero(self) -> bool:
        return True

    def time_factor(self, taus):
        return np.zeros_like(taus)

    def time_factor_tt(self, taus):
        return np.zeros_like(taus)


class ConstantHistory(HistoryProfile):
    """y0(x, t) = φ(x): η⁰(s) = s φ"""
    name = "constant"

    def time_factor(self, taus):
        return np.ones_like(taus)

    def time_factor_tt(self, taus):
        return np.zeros_like(taus)


class ExpDecayHistory(HistoryProfile):
    """y0(x, t) = φ(x) e^{-rate t}"""
    name = "exp_decay"

    def time_factor(self, taus):
        return np.exp(-self.rate * taus)

    def time_factor_tt(self, taus):
        return self.rate ** 2 * np.exp(-self.rate * taus)

    def describe(self) -> str:
        return f"{self.name}(rate={self.rate})"
