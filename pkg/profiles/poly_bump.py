# profiles/poly_bump.py
from .base_profile import InitialProfile


class PolyBump(InitialProfile):
    name = "poly_bump"

    def factor(self, x, length):
        # x²(L - x)²: ноль и нулевая производная на обоих концах
        return x ** 2 * (length - x) ** 2
