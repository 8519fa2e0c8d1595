# core/energy_meter.py
"""
Энергия E_j, диссипация, энергии высших порядков E_{j,k}
и мониторы неравенств (эмпирические отношения, не константы доказательств).
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from config import constants
from core.errors import StateError
from core.kernel_toolkit import ConvexityProfile
from core.memory_engine import HistoryField, SGrid, memory_force
from core.spatial_discretization import Grid, norms_squared, schrodinger_operator
from models.simulation import MonitorRecord, StateSnapshot

logger = logging.getLogger(__name__)


# =============================================================================
# ЭНЕРГИЯ И ДИССИПАЦИЯ
# =============================================================================

def _state_energy(grid: Grid, sgrid: SGrid, y: np.ndarray, eta: np.ndarray, j: int) -> float:
    """½(‖y‖² + Σ w_m g(s_m) ‖Δ^{j/2} η_m‖²)"""
    y_part = norms_squared(grid, y[None, :], 0)[0]
    memory_part = float(sgrid.g_weights @ norms_squared(grid, eta, j))
    return 0.5 * (y_part + memory_part)


def energy(state, j: Optional[int] = None) -> float:
    j = state.j if j is None else j
    return _state_energy(state.grid, state.sgrid, state.y, state.eta.values, j)


def memory_energy(state, j: Optional[int] = None) -> float:
    """Σ w g ‖Δ^{j/2} η‖² = ‖η‖²_{L_j}"""
    j = state.j if j is None else j
    return float(state.sgrid.g_weights @ norms_squared(state.grid, state.eta.values, j))


def dissipation_rhs(state, j: Optional[int] = None) -> float:
    """½ Σ w_m g'(s_m) ‖Δ^{j/2} η_m‖² ≤ 0"""
    j = state.j if j is None else j
    return 0.5 * float(state.sgrid.g_prime_weights @ norms_squared(state.grid, state.eta.values, j))


# =============================================================================
# ЭНЕРГИИ ВЫСШИХ ПОРЯДКОВ
# =============================================================================

def higher_energy(snapshots: Sequence[StateSnapshot], j: int, k: int,
                  grid: Grid, sgrid: SGrid) -> List[float]:
    """
    E_{j,k} = ½‖∂_t^k U‖² по конечным разностям последовательных снимков.
    k = 1: центральные разности (при двух снимках - разность вперёд);
    k = 2: центральные вторые разности.
    """
    if k not in (1, 2):
        raise StateError(f"Порядок k = {k} не из {{1, 2}}")
    if len(snapshots) < k + 1:
        raise StateError(f"Для E_{{j,{k}}} нужно минимум {k + 1} снимков, есть {len(snapshots)}")

    dt = snapshots[1].t - snapshots[0].t
    if dt <= 0:
        raise StateError("Снимки должны идти по возрастанию времени")

    values = []
    if k == 1 and len(snapshots) == 2:
        a, b = snapshots
        values.append(_state_energy(grid, sgrid, (b.y - a.y) / dt, (b.eta - a.eta) / dt, j))
        return values

    for i in range(1, len(snapshots) - 1):
        prev, center, nxt = snapshots[i - 1], snapshots[i], snapshots[i + 1]
        if k == 1:
            dy = (nxt.y - prev.y) / (2.0 * dt)
            deta = (nxt.eta - prev.eta) / (2.0 * dt)
        else:
            dy = (nxt.y - 2.0 * center.y + prev.y) / dt ** 2
            deta = (nxt.eta - 2.0 * center.eta + prev.eta) / dt ** 2
        values.append(_state_energy(grid, sgrid, dy, deta, j))
    return values


# =============================================================================
# МОНИТОРЫ
# =============================================================================

@dataclass
class MonitorBaseline:
    """Начальные энергии и данные истории для мониторов."""
    energy0: float
    energy1_0: float
    energy2_0: float
    eta0: HistoryField
    zeta0: Optional[HistoryField] = None
    eps0: Optional[float] = None
    c_bound: float = 0.0

    @property
    def total(self) -> float:
        return self.energy0 + self.energy1_0 + self.energy2_0


def _ratio(numerator: float, denominator: float) -> Optional[float]:
    if denominator < constants.MONITOR_FLOOR:
        return None
    return float(numerator / denominator)


def history_ratio(grid: Grid, sgrid: SGrid, j: int, t: float, history: np.ndarray,
                  initial: Optional[HistoryField], level: float) -> Optional[float]:
    """
    max_s ‖Δ^{j/2} η(s)‖² / M(t, s), где
    M = s² K при s ≤ t и M = 2‖Δ^{j/2} η⁰(s - t)‖² + 2 s² K при s > t.
    """
    if level <= 0:
        return None
    nodes = sgrid.nodes[1:]
    current = norms_squared(grid, history[1:], j)
    bound = nodes ** 2 * level
    beyond = nodes > t
    if np.any(beyond):
        bound[beyond] *= 2.0
        if initial is not None:
            past = initial.interpolate_many(nodes[beyond] - t)
            bound[beyond] += 2.0 * norms_squared(grid, past, j)
    active = bound >= constants.MONITOR_FLOOR
    if not np.any(active):
        return None
    return float(np.max(current[active] / bound[active]))


def lemma_monitors(state, baseline: MonitorBaseline, profile: Optional[ConvexityProfile] = None,
                   eta_tt: Optional[np.ndarray] = None) -> MonitorRecord:
    """Эмпирические отношения неравенств в текущем состоянии."""
    grid, j = state.grid, state.j
    vol = grid.volume
    y = state.y
    record = MonitorRecord(t=state.t)

    eta_energy = memory_energy(state)
    y_t = schrodinger_operator(grid) @ y + memory_force(state.eta, state.kernel, j, grid)
    cross = float(np.sum(y_t.real * y.imag - y_t.imag * y.real) * vol)
    denominator = eta_energy + abs(cross)

    record.h1 = _ratio(norms_squared(grid, y[None, :], 1)[0], denominator)
    if j == 2:
        record.h2 = _ratio(norms_squared(grid, y[None, :], 2)[0], denominator)

    record.bound = _ratio(norms_squared(grid, y[None, :], j)[0], baseline.total)
    if record.bound is not None:
        baseline.c_bound = max(baseline.c_bound, record.bound)

    if j == 0:
        level = 2.0 * baseline.energy0
    else:
        level = baseline.c_bound * baseline.total
    record.m_bound_0 = history_ratio(grid, state.sgrid, j, state.t, state.eta.values, baseline.eta0, level)

    if j == 0 and eta_tt is not None:
        record.m_bound_2 = history_ratio(grid, state.sgrid, 0, state.t, eta_tt, baseline.zeta0,
                                         2.0 * baseline.energy2_0)

    if profile is not None and baseline.eps0 is not None:
        x = baseline.eps0 * energy(state)
        if x >= constants.MONITOR_FLOOR:
            g0x = profile.G0(x)
            numerator = g0x / x * eta_energy
            record.convex = _ratio(numerator, -dissipation_rhs(state) + g0x)

    return record


def default_eps0(energy0: float) -> Optional[float]:
    """ε₀ = 1 / (2 E_j(0)): тогда ε₀ E_j(t) ≤ ½."""
    if energy0 < constants.MONITOR_FLOOR:
        return None
    return 1.0 / (2.0 * energy0)
