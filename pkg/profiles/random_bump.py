# profiles/random_bump.py
import numpy as np

from .base_profile import InitialProfile


class RandomBump(InitialProfile):
    """Случайная комплексная смесь sin(kπx/L), k = 1..modes, умноженная на x²(L - x)²."""
    name = "random_bump"
    modes = 4

    def __init__(self, center: float = None, width: float = 0.1, seed: int = 0):
        super().__init__(center, width, seed)
        rng = np.random.default_rng(seed)
        self.coefficients = rng.normal(size=self.modes) + 1j * rng.normal(size=self.modes)

    def factor(self, x, length):
        k = np.arange(1, self.modes + 1)
        waves = np.sin(np.outer(x, k) * np.pi / length) @ self.coefficients
        return waves * x ** 2 * (length - x) ** 2

    def describe(self) -> str:
        return f"{self.name}(seed={self.seed})"
