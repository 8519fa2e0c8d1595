# profiles/base_profile.py
import numpy as np

from core.spatial_discretization import grid_points


class InitialProfile:
    """
    Базовый интерфейс начального профиля.
    Подклассы реализуют factor(x, length) - одномерный множитель,
    обращающийся в ноль вместе с производной на концах отрезка.
    В 2D профиль равен произведению множителей по осям.
    """
    name: str = "InitialProfile"

    def __init__(self, center: float = None, width: float = 0.1, seed: int = 0):
        self.center = center
        self.width = width
        self.seed = seed

    def factor(self, x: np.ndarray, length: float) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, grid, amplitude: float = 1.0) -> np.ndarray:
        """Поле на внутренних узлах с дискретной L²-нормой amplitude."""
        points = grid_points(grid)
        values = np.ones(grid.size, dtype=complex)
        for axis, length in enumerate(grid.lengths):
            values = values * self.factor(points[:, axis], length)
        norm = np.sqrt(np.sum(np.abs(values) ** 2) * grid.volume)
        if norm == 0:
            return np.zeros(grid.size, dtype=complex)
        return (amplitude * values / norm).astype(complex)

    def describe(self) -> str:
        return self.name
