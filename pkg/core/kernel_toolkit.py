# core/kernel_toolkit.py
"""
Ядра релаксации (f, g = -f'), профили выпуклости G и огибающие G_n.

Все объекты неизменяемы после создания и могут разделяться между потоками.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from config import constants
from core.errors import AdmissibilityError, ParameterDomainError
from models.simulation import AssumptionReport, KernelFamily, ProfileMode

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
ScalarFn = Callable[[ArrayLike], ArrayLike]


# =============================================================================
# ЯДРО РЕЛАКСАЦИИ
# =============================================================================

@dataclass(frozen=True)
class Kernel:
    """
    Пара (f, g) с производной g' и метаданными допустимости.
    c0 - константа в 0 ≤ f'' ≤ -c0 f', alpha0 - скорость в g' ≤ -alpha0 g
    (None, если экспоненциальная оценка не выполняется).
    """
    family: KernelFamily
    params: Tuple
    f: ScalarFn = field(repr=False)
    g: ScalarFn = field(repr=False)
    g_prime: ScalarFn = field(repr=False)
    c0: float = 0.0
    alpha0: Optional[float] = None

    def eval_f(self, s: ArrayLike) -> ArrayLike:
        return self.f(s)

    def eval_g(self, s: ArrayLike) -> ArrayLike:
        return self.g(s)

    def eval_g_prime(self, s: ArrayLike) -> ArrayLike:
        return self.g_prime(s)

    @property
    def is_memoryless(self) -> bool:
        return self.family is KernelFamily.NONE

    @property
    def g0(self) -> float:
        """g0 = ∫g = f(0)"""
        return float(self.f(0.0))

    def describe(self) -> str:
        return f"{self.family.value}{self.params}"


def _require_positive(name: str, value: float):
    if not (value > 0) or not math.isfinite(value):
        raise ParameterDomainError(f"{name} должен быть положительным, получено {value}", key=name)


def make_exponential_kernel(d1: float, q1: float) -> Kernel:
    """g(s) = d1 e^{-q1 s}, c0 = alpha0 = q1."""
    _require_positive("d1", d1)
    _require_positive("q1", q1)

    def g(s):
        return d1 * np.exp(-q1 * np.asarray(s, dtype=float))

    def f(s):
        return (d1 / q1) * np.exp(-q1 * np.asarray(s, dtype=float))

    def g_prime(s):
        return -q1 * g(s)

    return Kernel(KernelFamily.EXPONENTIAL, (d1, q1), f, g, g_prime, c0=q1, alpha0=q1)


def minimal_power_exponent(q2: float) -> float:
    """Нижняя граница p для G(s) = s^p при ядре (1+s)^{-q2}."""
    if q2 <= 3:
        raise AdmissibilityError(f"q2 = {q2}: нужна q2 > 3", key="q2")
    return (q2 + 1.0) / (q2 - 3.0)


def make_polynomial_kernel(d2: float, q2: float) -> Kernel:
    """g(s) = d2 (1+s)^{-q2}, c0 = q2, допустимо только при q2 > 3."""
    _require_positive("d2", d2)
    _require_positive("q2", q2)
    if q2 <= 3:
        raise AdmissibilityError(
            f"q2 = {q2} ≤ 3: интеграл выпуклости ∫ s²g/G⁻¹(-g') ds расходится, требуется q2 > 3",
            key="q2",
        )

    def g(s):
        return d2 * np.power(1.0 + np.asarray(s, dtype=float), -q2)

    def f(s):
        return d2 * np.power(1.0 + np.asarray(s, dtype=float), 1.0 - q2) / (q2 - 1.0)

    def g_prime(s):
        return -q2 * d2 * np.power(1.0 + np.asarray(s, dtype=float), -q2 - 1.0)

    return Kernel(KernelFamily.POLYNOMIAL, (d2, q2), f, g, g_prime, c0=q2, alpha0=None)


def make_prony_kernel(terms: Sequence[Tuple[float, float]]) -> Kernel:
    """g(s) = Σ d_k e^{-q_k s}; c0 = max q_k, alpha0 = min q_k."""
    terms = [(float(d), float(q)) for d, q in terms]
    if not terms:
        raise ParameterDomainError("Пустой список членов Prony", key="prony_terms")
    for d, q in terms:
        _require_positive("d_k", d)
        _require_positive("q_k", q)

    d_arr = np.array([t[0] for t in terms])
    q_arr = np.array([t[1] for t in terms])

    def _sum(coef, s):
        s = np.asarray(s, dtype=float)
        return np.sum(coef[:, None] * np.exp(-np.outer(q_arr, s.ravel())), axis=0).reshape(s.shape)

    def g(s):
        return _sum(d_arr, s)

    def f(s):
        return _sum(d_arr / q_arr, s)

    def g_prime(s):
        return _sum(-d_arr * q_arr, s)

    return Kernel(
        KernelFamily.PRONY, tuple(terms), f, g, g_prime,
        c0=float(q_arr.max()), alpha0=float(q_arr.min()),
    )


def make_custom_kernel(f: ScalarFn, g: ScalarFn, g_prime: ScalarFn,
                       c0: float, alpha0: Optional[float] = None) -> Kernel:
    """Пользовательское ядро; допустимость проверяет validate_assumptions."""
    _require_positive("c0", c0)
    if alpha0 is not None:
        _require_positive("alpha0", alpha0)
    return Kernel(KernelFamily.CUSTOM, (), f, g, g_prime, c0=c0, alpha0=alpha0)


def make_null_kernel() -> Kernel:
    """g ≡ 0: консервативная система без памяти."""

    def zero(s):
        return np.zeros_like(np.asarray(s, dtype=float))

    return Kernel(KernelFamily.NONE, (), zero, zero, zero, c0=0.0, alpha0=None)


# =============================================================================
# ЧИСЛЕННОЕ ОБРАЩЕНИЕ МОНОТОННЫХ ФУНКЦИЙ
# =============================================================================

def invert_increasing(func: Callable[[float], float], y: float, name: str = "G") -> float:
    """
    Решает func(x) = y для возрастающей func с func(0) = 0.
    Верхняя граница ищется удвоением, затем brentq.
    """
    y = float(y)
    if y < 0 or not math.isfinite(y):
        raise ParameterDomainError(f"{name}⁻¹ не определена в точке {y}")
    if y == 0.0:
        return 0.0

    hi = 1.0
    steps = 0
    if func(hi) >= y:
        while func(hi / 2.0) >= y:
            hi /= 2.0
            steps += 1
            if steps > constants.INVERSION_MAX_DOUBLINGS:
                raise ParameterDomainError(f"Не удалось зажать {name}⁻¹ в точке s = {y}")
        lo = hi / 2.0
    else:
        lo = hi
        while func(hi) < y:
            lo = hi
            hi *= 2.0
            steps += 1
            if steps > constants.INVERSION_MAX_DOUBLINGS or not math.isfinite(hi):
                raise ParameterDomainError(f"Не удалось зажать {name}⁻¹ в точке s = {y}")

    if func(hi) == y:
        return hi
    return brentq(lambda x: func(x) - y, lo, hi, xtol=1e-300, rtol=constants.INVERSION_RTOL, maxiter=500)


# =============================================================================
# ПРОФИЛЬ ВЫПУКЛОСТИ
# =============================================================================

class ConvexityProfile:
    """
    Строго выпуклая возрастающая G с G', обратными функциями,
    двойственной G* и отображением K(s) = s / G⁻¹(s).

    mode = LINEAR: G0(s) = s (ядро экспоненциально затухает со скоростью alpha0);
    mode = CONVEX: G0(s) = s G'(s).
    """

    def __init__(self, mode: ProfileMode, G: Callable[[float], float],
                 G_prime: Callable[[float], float], alpha0: Optional[float] = None,
                 exponent: Optional[float] = None,
                 G_inv: Optional[Callable[[float], float]] = None,
                 G_prime_inv: Optional[Callable[[float], float]] = None,
                 G0_inv: Optional[Callable[[float], float]] = None):
        if mode is ProfileMode.LINEAR:
            _require_positive("alpha0", alpha0 if alpha0 is not None else 0.0)
        self.mode = mode
        self._G = G
        self._G_prime = G_prime
        self.alpha0 = alpha0
        self.exponent = exponent
        self._G_inv = G_inv
        self._G_prime_inv = G_prime_inv
        self._G0_inv = G0_inv

    # --- прямые функции ---

    def G(self, s: float) -> float:
        return float(self._G(s))

    def G_prime(self, s: float) -> float:
        return float(self._G_prime(s))

    def G0(self, s: float) -> float:
        if self.mode is ProfileMode.LINEAR:
            return float(s)
        return float(s) * self.G_prime(s)

    # --- обратные функции ---

    def G_inv(self, y: float) -> float:
        if self._G_inv is not None:
            return float(self._G_inv(y))
        return invert_increasing(self.G, y, "G")

    def G_prime_inv(self, y: float) -> float:
        if self._G_prime_inv is not None:
            return float(self._G_prime_inv(y))
        return invert_increasing(self.G_prime, y, "G'")

    def G0_inv(self, y: float) -> float:
        if self.mode is ProfileMode.LINEAR:
            if y < 0:
                raise ParameterDomainError(f"G0⁻¹ не определена в точке {y}")
            return float(y)
        if self._G0_inv is not None:
            return float(self._G0_inv(y))
        return invert_increasing(self.G0, y, "G0")

    # --- производные величины ---

    def dual(self, s: float) -> float:
        """G*(s) = s (G')⁻¹(s) − G((G')⁻¹(s))"""
        x = self.G_prime_inv(s)
        return s * x - self.G(x)

    def K(self, s: float) -> float:
        """K(s) = s / G⁻¹(s), K(0⁺) = 0"""
        if s <= 0:
            return 0.0
        return s / self.G_inv(s)

    def describe(self) -> str:
        if self.mode is ProfileMode.LINEAR:
            return f"linear(alpha0={self.alpha0})"
        if self.exponent is not None:
            return f"power(p={self.exponent})"
        return "convex(custom)"


def _power_parts(p: float):
    def G(s):
        return float(s) ** p

    def G_prime(s):
        return p * float(s) ** (p - 1.0)

    def G_inv(y):
        if y < 0:
            raise ParameterDomainError(f"G⁻¹ не определена в точке {y}")
        return float(y) ** (1.0 / p)

    def G_prime_inv(y):
        if y < 0:
            raise ParameterDomainError(f"(G')⁻¹ не определена в точке {y}")
        return (float(y) / p) ** (1.0 / (p - 1.0))

    return G, G_prime, G_inv, G_prime_inv


def make_linear_profile(alpha0: float, p: float = 2.0) -> ConvexityProfile:
    """Линейный режим: G0(s) = s; G(s) = s^p используется для K и G*."""
    if p <= 1:
        raise ParameterDomainError(f"p = {p}: нужна p > 1", key="p")
    G, G_prime, G_inv, G_prime_inv = _power_parts(p)
    return ConvexityProfile(ProfileMode.LINEAR, G, G_prime, alpha0=alpha0, exponent=p,
                            G_inv=G_inv, G_prime_inv=G_prime_inv)


def make_power_profile(p: float) -> ConvexityProfile:
    """Выпуклый режим с G(s) = s^p, p > 1; G0(s) = p s^p."""
    if p <= 1:
        raise ParameterDomainError(f"p = {p}: нужна p > 1", key="p")
    G, G_prime, G_inv, G_prime_inv = _power_parts(p)

    def G0_inv(y):
        if y < 0:
            raise ParameterDomainError(f"G0⁻¹ не определена в точке {y}")
        return (float(y) / p) ** (1.0 / p)

    return ConvexityProfile(ProfileMode.CONVEX, G, G_prime, exponent=p,
                            G_inv=G_inv, G_prime_inv=G_prime_inv, G0_inv=G0_inv)


def make_custom_profile(G: Callable[[float], float], G_prime: Callable[[float], float],
                        mode: ProfileMode = ProfileMode.CONVEX,
                        alpha0: Optional[float] = None) -> ConvexityProfile:
    """Профиль по пользовательским G и G'; все обратные функции численные."""
    return ConvexityProfile(mode, G, G_prime, alpha0=alpha0)


# =============================================================================
# ОГИБАЮЩИЕ G_n
# =============================================================================

class GnEvaluator:
    """
    G_1 = G0⁻¹, G_m(s) = G_1(s G_{m-1}(s)).
    Композиции запоминаются (lru_cache), вызов безопасен из нескольких потоков.
    """

    def __init__(self, profile: ConvexityProfile, n: int):
        if int(n) != n or n < 1:
            raise ParameterDomainError(f"n = {n}: нужно целое n ≥ 1", key="n")
        self.profile = profile
        self.n = int(n)
        self._cached = lru_cache(maxsize=65536)(self._compose)

    def _compose(self, m: int, s: float) -> float:
        if s < 0:
            raise ParameterDomainError(f"G_{m} не определена в точке {s}")
        if m == 1:
            return self.profile.G0_inv(s)
        return self.profile.G0_inv(s * self._cached(m - 1, s))

    def level(self, m: int, s: float) -> float:
        """G_m(s) для 1 ≤ m ≤ n."""
        if m < 1 or m > self.n:
            raise ParameterDomainError(f"уровень {m} вне диапазона 1..{self.n}")
        return self._cached(m, float(s))

    def __call__(self, s: ArrayLike) -> ArrayLike:
        if np.ndim(s) == 0:
            return self.level(self.n, float(s))
        return np.array([self.level(self.n, float(x)) for x in np.ravel(s)]).reshape(np.shape(s))


def build_Gn(profile: ConvexityProfile, n: int) -> GnEvaluator:
    return GnEvaluator(profile, n)


def eval_pn(p_exponent: float, n: int) -> float:
    """p_n = Σ_{m=1}^n p^{-m}"""
    if not p_exponent > 1:
        raise ParameterDomainError(f"p = {p_exponent}: нужна p > 1", key="p")
    if int(n) != n or n < 1:
        raise ParameterDomainError(f"n = {n}: нужно целое n ≥ 1", key="n")
    return float(sum(p_exponent ** (-m) for m in range(1, int(n) + 1)))


# =============================================================================
# ПРОВЕРКА ДОПУЩЕНИЙ
# =============================================================================

def composite_grid(stop: Callable[[float], bool], s_cap: float = constants.ASSUMPTION_S_CAP,
                   s_start_cap: Optional[float] = None) -> np.ndarray:
    """
    Равномерная сетка на [0, 1], дальше геометрический рост с шагом 1.1
    до первого узла, где stop(s) истинно, или до s_cap.
    """
    uniform = np.linspace(0.0, 1.0, constants.ASSUMPTION_UNIFORM_POINTS)
    tail = []
    s = 1.0
    while s < s_cap:
        s *= constants.ASSUMPTION_GEOMETRIC_RATIO
        tail.append(s)
        if stop(s):
            break
    return np.concatenate([uniform, np.array(tail)])


def _extend_grid(grid: np.ndarray, factor: float = 2.0) -> np.ndarray:
    """Продолжает геометрический хвост сетки до factor * s_end."""
    s_end = grid[-1]
    extra = []
    s = s_end
    while s < factor * s_end:
        s = min(s * constants.ASSUMPTION_GEOMETRIC_RATIO, factor * s_end)
        extra.append(s)
    return np.concatenate([grid, np.array(extra)])


def _tail_integrals(kernel: Kernel, grid: np.ndarray, g: np.ndarray) -> np.ndarray:
    """
    ∫_{s_i}^{s_end} g по формуле Симпсона на каждом отрезке сетки
    (с отдельным значением в середине отрезка).
    """
    midpoints = 0.5 * (grid[1:] + grid[:-1])
    g_mid = np.asarray(kernel.eval_g(midpoints), dtype=float)
    pieces = np.diff(grid) / 6.0 * (g[:-1] + 4.0 * g_mid + g[1:])
    return np.append(np.cumsum(pieces[::-1])[::-1], 0.0)


def validate_assumptions(kernel: Kernel, profile: ConvexityProfile, sgrid=None,
                         tol: float = constants.DEFAULT_TAIL_TOL) -> AssumptionReport:
    """
    Проверяет допущения на ядро выборкой на составной сетке.
    Ошибок не выбрасывает: всё уходит в отчёт.
    """
    if kernel.is_memoryless:
        s_max = float(sgrid.s_max) if sgrid is not None else 0.0
        return AssumptionReport(
            relaxation_ok=True, density_ok=True, tail_vanishes=True,
            exponential_rate_ok=None, convexity_integral=None, convexity_sup=None,
            convexity_finite=None, g0_quadrature=0.0, f0=0.0, truncated_mass=0.0, s_max=s_max,
        )

    g_at_zero = float(kernel.eval_g(0.0))
    grid = composite_grid(lambda s: float(kernel.eval_g(s)) < tol * g_at_zero)
    g = np.asarray(kernel.eval_g(grid), dtype=float)
    gp = np.asarray(kernel.eval_g_prime(grid), dtype=float)
    f = np.asarray(kernel.eval_f(grid), dtype=float)
    rtol = constants.ASSUMPTION_SAMPLE_RTOL

    # g > 0, g' ≤ 0, -g' ≤ c0 g
    relaxation_ok = bool(
        np.all(g > 0)
        and np.all(gp <= rtol * np.abs(g))
        and np.all(-gp <= kernel.c0 * g * (1.0 + rtol) + 1e-300)
    )

    # ∫g = f(0) и f(s) = ∫_s^∞ g
    f0 = float(kernel.eval_f(0.0))
    g0_quadrature = float(simpson(g, x=grid)) + float(f[-1])
    tail_from_quadrature = _tail_integrals(kernel, grid, g) + f[-1]
    g0_tol = constants.ASSUMPTION_G0_RTOL * max(f0, 1e-300)
    density_ok = bool(
        abs(g0_quadrature - f0) <= g0_tol
        and np.max(np.abs(tail_from_quadrature - f)) <= g0_tol
    )

    tail_vanishes = bool(g[-1] < tol * g_at_zero)

    exponential_rate_ok = None
    if profile.mode is ProfileMode.LINEAR:
        exponential_rate_ok = bool(np.all(gp <= -profile.alpha0 * g * (1.0 - rtol)))

    convexity_integral = convexity_sup = convexity_finite = None
    if profile.mode is ProfileMode.CONVEX:
        convexity_integral, convexity_sup, convexity_finite = _convexity_integrals(kernel, profile)

    if sgrid is not None:
        s_max = float(sgrid.s_max)
    else:
        s_max = float(grid[-1])
    truncated_mass = float(kernel.eval_f(s_max))

    report = AssumptionReport(
        relaxation_ok=relaxation_ok,
        density_ok=density_ok,
        tail_vanishes=tail_vanishes,
        exponential_rate_ok=exponential_rate_ok,
        convexity_integral=convexity_integral,
        convexity_sup=convexity_sup,
        convexity_finite=convexity_finite,
        g0_quadrature=g0_quadrature,
        f0=f0,
        truncated_mass=truncated_mass,
        s_max=s_max,
    )
    logger.debug(f"📋 Допущения для {kernel.describe()}: {report.to_dict()}")
    return report


def _convexity_integrals(kernel: Kernel, profile: ConvexityProfile):
    """∫ s² g / G⁻¹(-g') ds и sup g / G⁻¹(-g'), плюс тест хвоста удвоением."""

    def ratio(s: float) -> float:
        denom = profile.G_inv(max(-float(kernel.eval_g_prime(s)), 0.0))
        if denom <= 0:
            return math.inf
        return float(kernel.eval_g(s)) / denom

    def integrand(s: float) -> float:
        return s * s * ratio(s)

    grid = composite_grid(lambda s: integrand(s) < constants.ASSUMPTION_INTEGRAND_FLOOR)
    extended = _extend_grid(grid)

    ratios = np.array([ratio(s) for s in extended])
    values = extended ** 2 * ratios
    if not np.all(np.isfinite(values)):
        return math.inf, math.inf, False

    n_base = len(grid)
    base = float(simpson(values[:n_base], x=grid))
    doubled = float(simpson(values, x=extended))
    jump = abs(doubled - base) / max(abs(base), 1e-300)
    finite = bool(jump <= constants.ASSUMPTION_DIVERGENCE_JUMP)
    sup = float(np.max(ratios[:n_base]))
    if not finite:
        logger.warning(f"⚠️ Интеграл выпуклости расходится: скачок {jump:.3g} при удвоении s_max")
    return base, sup, finite
