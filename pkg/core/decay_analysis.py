# core/decay_analysis.py
"""
Оценка скорости затухания энергии и проверка огибающей E(t) ≤ α G_n(α / t).
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from config import constants
from core.errors import DataError, WindowError
from core.kernel_toolkit import ConvexityProfile, GnEvaluator, eval_pn
from models.simulation import DecayReport, EnergyRecord, ProfileMode

logger = logging.getLogger(__name__)


def _window(records: Sequence[EnergyRecord], t0: float, t1: float) -> Tuple[np.ndarray, np.ndarray]:
    chosen = [r for r in records if r.t > 0 and t0 <= r.t <= t1]
    times = np.array([r.t for r in chosen], dtype=float)
    energies = np.array([r.energy for r in chosen], dtype=float)
    return times, energies


def _geometric_subsample(times: np.ndarray, limit: int) -> np.ndarray:
    """Индексы записей, ближайших к геометрической сетке по t."""
    if len(times) <= limit:
        return np.arange(len(times))
    targets = np.geomspace(times[0], times[-1], limit)
    picked = np.unique(np.searchsorted(times, targets).clip(0, len(times) - 1))
    return picked


# =============================================================================
# НАКЛОН В ЛОГ-ЛОГ МАСШТАБЕ
# =============================================================================

def fit_decay(records: Sequence[EnergyRecord], t0: float, t1: float) -> DecayReport:
    """Наклон log E против log t; положительная скорость r = -наклон."""
    times, energies = _window(records, t0, t1)
    if len(times) < constants.MIN_FIT_POINTS:
        raise WindowError(
            f"В окне [{t0}, {t1}] {len(times)} записей, нужно не меньше {constants.MIN_FIT_POINTS}"
        )
    if np.any(energies <= 0):
        raise DataError(f"Неположительная энергия в окне [{t0}, {t1}]")

    picked = _geometric_subsample(times, constants.MAX_FIT_POINTS)
    fit = linregress(np.log(times[picked]), np.log(energies[picked]))
    rate = -float(fit.slope) + 0.0
    r_squared = float(fit.rvalue) ** 2

    report = DecayReport(
        t0=float(t0),
        t1=float(t1),
        rate=rate,
        r_squared=r_squared,
        confident=r_squared >= constants.CONFIDENT_R2,
        n_points=len(picked),
    )
    logger.debug(f"📉 Наклон на [{t0}, {t1}]: r = {rate:.4f}, R² = {r_squared:.4f}")
    return report


# =============================================================================
# ОГИБАЮЩАЯ
# =============================================================================

@dataclass
class EnvelopeFit:
    alpha: Optional[float]
    holds: bool
    capped: bool
    vacuous: bool


def fit_envelope(records: Sequence[EnergyRecord], gn: GnEvaluator, window: Tuple[float, float],
                 cap: Optional[float] = None) -> EnvelopeFit:
    """
    Наименьшее α, при котором E(t) ≤ α G_n(α / t) во всех записях окна.
    Огибающая считается выполненной, если α ≤ cap и она не вырождена:
    α G_n(α / T1) < E(T0).
    """
    times, energies = _window(records, *window)
    if len(times) == 0:
        raise WindowError(f"В окне {window} нет записей")

    cap = cap if cap is not None else constants.ALPHA_CAP_FACTOR * energies[0]
    slack = 1.0 + constants.ENVELOPE_RTOL

    def works(alpha: float) -> bool:
        envelope = alpha * gn(alpha / times)
        return bool(np.all(energies <= envelope * slack))

    hi = max(float(np.max(energies)), 1e-300)
    while not works(hi):
        hi *= 2.0
        if hi > cap:
            logger.warning(f"⚠️ Огибающая не выполняется ни при каком α ≤ {cap:.3g}")
            return EnvelopeFit(alpha=None, holds=False, capped=True, vacuous=False)

    lo = 0.0
    for _ in range(constants.BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if works(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= constants.ENVELOPE_RTOL * hi:
            break

    alpha = hi
    tail = alpha * float(gn(alpha / times[-1]))
    vacuous = tail >= energies[0] * (1.0 - 1e-9)
    capped = alpha > cap
    return EnvelopeFit(alpha=alpha, holds=not capped and not vacuous, capped=capped, vacuous=vacuous)


def check_envelope(records: Sequence[EnergyRecord], gn: GnEvaluator,
                   window: Tuple[float, float], cap: Optional[float] = None) -> Tuple[Optional[float], bool]:
    fit = fit_envelope(records, gn, window, cap)
    return fit.alpha, fit.holds


def envelope_beta(alpha: Optional[float], profile: ConvexityProfile, n: int) -> Optional[float]:
    """
    Константа β в E ≤ β t^{-rate}:
    линейный режим β = α^{n+1}; G(s) = s^p даёт β = α (α / p)^{p_n}.
    """
    if alpha is None:
        return None
    if profile.mode is ProfileMode.LINEAR:
        return alpha ** (n + 1)
    if profile.exponent is not None:
        return alpha * (alpha / profile.exponent) ** eval_pn(profile.exponent, n)
    return None


def envelope_rate(profile: ConvexityProfile, n: int) -> Optional[float]:
    """Показатель t^{-rate} огибающей: n или p_n."""
    if profile.mode is ProfileMode.LINEAR:
        return float(n)
    if profile.exponent is not None:
        return eval_pn(profile.exponent, n)
    return None


def analyze_decay(records: List[EnergyRecord], gn: GnEvaluator, profile: ConvexityProfile,
                  t0: float, t1: float, eps0: Optional[float] = None) -> DecayReport:
    """Наклон + огибающая в одном отчёте."""
    report = fit_decay(records, t0, t1)
    envelope = fit_envelope(records, gn, (t0, t1))
    report.alpha = envelope.alpha
    report.holds = envelope.holds
    report.capped = envelope.capped
    report.vacuous = envelope.vacuous
    report.beta = envelope_beta(envelope.alpha, profile, gn.n)
    report.eps0 = eps0
    report.n = gn.n
    return report
