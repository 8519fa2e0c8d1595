#!/usr/bin/env python3
"""
МОДЕЛИ ДАННЫХ BiMemLab

Здесь собраны перечисления и записи, которыми обмениваются модули:
- семейства ядер, режимы профиля выпуклости, схемы шага
- записи энергии и мониторов
- отчёты о допущениях и затухании
- траектория прогона
"""

from typing import Dict, List, Optional, Any
from dataclasses import dataclass, field
from enum import Enum


# =============================================================================
# ПЕРЕЧИСЛЕНИЯ
# =============================================================================

class KernelFamily(Enum):
    """Семейство ядра релаксации"""
    EXPONENTIAL = "exponential"   # g = d e^{-qs}
    POLYNOMIAL = "polynomial"     # g = d (1+s)^{-q}
    PRONY = "prony"               # сумма экспонент
    CUSTOM = "custom"             # пользовательские функции
    NONE = "none"                 # g ≡ 0, без памяти


class ProfileMode(Enum):
    """Режим профиля выпуклости"""
    LINEAR = "linear"   # g' ≤ -α0 g, G0(s) = s
    CONVEX = "convex"   # G0(s) = s G'(s)


class Scheme(Enum):
    """Схема шага по времени"""
    STRANG_CN = "strang_cn"
    IMPLICIT_EULER = "implicit_euler"


# =============================================================================
# ПАРАМЕТРЫ ШАГА
# =============================================================================

@dataclass(frozen=True)
class StepParams:
    scheme: Scheme = Scheme.STRANG_CN
    tol: float = 1e-10
    maxiter: int = 1000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol должен быть положительным")


# =============================================================================
# ЗАПИСИ ЭНЕРГИИ И МОНИТОРОВ
# =============================================================================

@dataclass
class MonitorRecord:
    """
    Эмпирические отношения неравенств на момент t.
    None означает "монитор неактивен" (знаменатель ниже порога).
    """
    t: float
    h1: Optional[float] = None          # ‖∇y‖² / (‖η‖²_{L_j} + |перекрёстный член|)
    h2: Optional[float] = None          # ‖Δy‖² / (...), только j = 2
    bound: Optional[float] = None       # ‖Δ^{j/2}y‖² / (E(0) + E1(0) + E2(0))
    m_bound_0: Optional[float] = None   # max_s ‖Δ^{j/2}η(s)‖² / M_{j,0}(t, s)
    m_bound_2: Optional[float] = None   # то же для вторых производных (j = 0)
    convex: Optional[float] = None      # отношение ключевой выпуклой оценки

    def to_dict(self) -> Dict[str, Any]:
        return {
            't': self.t,
            'h1': self.h1,
            'h2': self.h2,
            'bound': self.bound,
            'm_bound_0': self.m_bound_0,
            'm_bound_2': self.m_bound_2,
            'convex': self.convex,
        }


@dataclass
class EnergyRecord:
    t: float
    energy: float
    dissipation: float
    e1: Optional[float] = None
    e2: Optional[float] = None
    monitors: Optional[MonitorRecord] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            't': self.t,
            'E': self.energy,
            'D': self.dissipation,
            'E1': self.e1,
            'E2': self.e2,
            'monitors': self.monitors.to_dict() if self.monitors else None,
        }


# =============================================================================
# ОТЧЁТЫ
# =============================================================================

@dataclass
class AssumptionReport:
    """Результат численной проверки допущений на ядро и профиль."""
    relaxation_ok: bool            # g > 0, g' ≤ 0, -g' ≤ c0 g
    density_ok: bool               # ∫g = f(0)
    tail_vanishes: bool            # g → 0
    exponential_rate_ok: Optional[bool]   # g' ≤ -α0 g (только линейный режим)
    convexity_integral: Optional[float]   # ∫ s² g / G⁻¹(-g') ds
    convexity_sup: Optional[float]        # m0 = sup g / G⁻¹(-g')
    convexity_finite: Optional[bool]
    g0_quadrature: float
    f0: float
    truncated_mass: float
    s_max: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'relaxation_ok': self.relaxation_ok,
            'density_ok': self.density_ok,
            'tail_vanishes': self.tail_vanishes,
            'exponential_rate_ok': self.exponential_rate_ok,
            'convexity_integral': self.convexity_integral,
            'convexity_sup': self.convexity_sup,
            'convexity_finite': self.convexity_finite,
            'g0_quadrature': self.g0_quadrature,
            'f0': self.f0,
            'truncated_mass': self.truncated_mass,
            's_max': self.s_max,
        }


@dataclass
class DecayReport:
    t0: float
    t1: float
    rate: float
    r_squared: float
    confident: bool
    n_points: int
    alpha: Optional[float] = None
    holds: Optional[bool] = None
    capped: bool = False
    vacuous: bool = False
    beta: Optional[float] = None
    eps0: Optional[float] = None
    n: int = 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            'window': [self.t0, self.t1],
            'rate': self.rate,
            'r_squared': self.r_squared,
            'confident': self.confident,
            'n_points': self.n_points,
            'alpha': self.alpha,
            'holds': self.holds,
            'capped': self.capped,
            'vacuous': self.vacuous,
            'beta': self.beta,
            'eps0': self.eps0,
            'n': self.n,
        }


@dataclass
class CheckResult:
    """Строка проверки: PASS/FAIL и пояснение."""
    name: str
    passed: bool
    detail: str = ""

    def __str__(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.name}" + (f" ({self.detail})" if self.detail else "")


# =============================================================================
# ТРАЕКТОРИЯ
# =============================================================================

@dataclass
class StateSnapshot:
    """Копия (y, η) в момент t для конечных разностей по времени."""
    t: float
    y: Any
    eta: Any

    @classmethod
    def of(cls, state) -> "StateSnapshot":
        return cls(state.t, state.y.copy(), state.eta.values.copy())


@dataclass
class Trajectory:
    records: List[EnergyRecord] = field(default_factory=list)
    snapshots: List[StateSnapshot] = field(default_factory=list)
    error: Optional[str] = None
    error_exit_code: int = 0
    backend_max_diff: Optional[float] = None
    monitor_maxima: Dict[str, float] = field(default_factory=dict)
    steps: int = 0

    @property
    def ok(self) -> bool:
        return self.error is None

    def times(self) -> List[float]:
        return [r.t for r in self.records]

    def energies(self) -> List[float]:
        return [r.energy for r in self.records]
