# profiles/gauss_bump.py
import numpy as np

from .base_profile import InitialProfile


class GaussBump(InitialProfile):
    """Гауссиана с центром center и шириной width·L, умноженная на x²(L - x)²."""
    name = "gauss_bump"

    def factor(self, x, length):
        center = self.center if self.center is not None else length / 2.0
        sigma = self.width * length
        return np.exp(-((x - center) ** 2) / (2.0 * sigma ** 2)) * x ** 2 * (length - x) ** 2

    def describe(self) -> str:
        return f"{self.name}(center={self.center}, width={self.width})"
