# profiles/sine_bump.py
import numpy as np

from .base_profile import InitialProfile


class SineBump(InitialProfile):
    name = "sine_bump"

    def factor(self, x, length):
        return np.sin(np.pi * x / length) ** 2
