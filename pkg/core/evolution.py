# core/evolution.py
"""
Интегрирование по времени связанной системы U = (y, η):

    ∂_t y = L y + (-1)^{j+1} ∫ g Δ^j η ds,   L = i(Δ - Δ²)
    ∂_t η = -∂_s η + y

strang_cn - два полушага Кранка-Николсона вокруг точного переноса истории;
implicit_euler - резольвентное решение (I - dt 𝒜) U = U^n.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, bicgstab, splu

from config import constants
from config.settings import settings
from core.errors import ConfigurationError, NumericError, SimulationError
from core.energy_meter import (
    MonitorBaseline, default_eps0, dissipation_rhs, energy, higher_energy, history_ratio, lemma_monitors,
)
from core.kernel_toolkit import Kernel
from core.memory_engine import (
    HistoryField, HistoryFn, SGrid, YRingBuffer, advance_history, build_sgrid, init_history, memory_force,
    memory_force_direct,
)
from core.spatial_discretization import Grid, check_field, memory_operator, norm_hj, schrodinger_operator
from models.simulation import EnergyRecord, Scheme, StateSnapshot, StepParams, Trajectory

logger = logging.getLogger(__name__)


# =============================================================================
# ЛИНЕЙНЫЕ РЕШАТЕЛИ
# =============================================================================

def make_solver(matrix: sp.spmatrix, params: StepParams) -> Callable[[np.ndarray], np.ndarray]:
    """
    Прямое разложение для небольших систем, BiCGSTAB с диагональным
    предобуславливателем начиная с settings.DIRECT_SOLVER_MAX_SIZE.
    """
    matrix = sp.csc_matrix(matrix, dtype=complex)
    size = matrix.shape[0]

    if size <= settings.DIRECT_SOLVER_MAX_SIZE:
        lu = splu(matrix)
        return lu.solve

    diagonal = matrix.diagonal()
    preconditioner = LinearOperator(matrix.shape, matvec=lambda v: v / diagonal, dtype=complex)

    def solve(rhs: np.ndarray) -> np.ndarray:
        solution, info = bicgstab(matrix, rhs, rtol=params.tol, maxiter=params.maxiter, M=preconditioner)
        if info != 0:
            residual = float(np.linalg.norm(matrix @ solution - rhs) / max(np.linalg.norm(rhs), 1e-300))
            raise NumericError(f"BiCGSTAB не сошёлся (info = {info})", residual=residual)
        return solution

    logger.info(f"⚙️ Итерационный решатель для системы размера {size}")
    return solve


@dataclass
class StepOperators:
    """Матрицы шага и их разложения; одни на весь прогон (dt фиксирован)."""
    schrodinger: sp.csr_matrix
    memory_matrix: sp.csr_matrix
    coupling: float
    inflow_coupling: float = 0.0
    inflow_solve: Optional[Callable] = None
    cn_solve: Optional[Callable] = None
    euler_solve: Optional[Callable] = None
    euler_gain: Optional[np.ndarray] = None


def build_operators(grid: Grid, sgrid: SGrid, kernel: Kernel, j: int, dt: float,
                    params: StepParams) -> StepOperators:
    L = schrodinger_operator(grid)
    B = memory_operator(grid, j)
    sign = (-1) ** (j + 1)
    # c_j = (-1)^{j+1} Σ_{m≥1} w_m g(s_m): вклад нового приращения истории
    coupling = sign * float(np.sum(sgrid.g_weights_for(kernel)[1:]))
    # на первом полушаге приращение копится ещё и в s = 0 с весом dt·g(0)
    inflow_coupling = coupling + sign * dt * float(kernel.eval_g(0.0))
    ops = StepOperators(schrodinger=L, memory_matrix=B, coupling=coupling, inflow_coupling=inflow_coupling)

    identity = sp.identity(grid.size, format="csr", dtype=complex)
    if params.scheme is Scheme.STRANG_CN:
        # полушаг τ = dt/2: A⁻ = I - τ/2 L - τ²/4 c B
        half = dt / 2.0
        base = identity - (half / 2.0) * L
        ops.inflow_solve = make_solver(base - (half * half / 4.0) * inflow_coupling * B, params)
        ops.cn_solve = make_solver(base - (half * half / 4.0) * coupling * B, params)
    else:
        gain = _upwind_gain(sgrid, dt)
        ops.euler_gain = gain
        weighted = float(np.sum(sgrid.g_weights_for(kernel)[1:] * gain[1:]))
        matrix = identity - dt * L - dt * (-1) ** (j + 1) * weighted * B
        ops.euler_solve = make_solver(matrix, params)
    return ops


# =============================================================================
# СОСТОЯНИЕ
# =============================================================================

@dataclass
class SimState:
    y: np.ndarray
    eta: HistoryField
    ring: Optional[YRingBuffer]
    t: float
    j: int
    kernel: Kernel
    grid: Grid
    sgrid: SGrid
    dt: float
    operators: Optional[StepOperators] = field(default=None, repr=False)
    step_index: int = 0

    def copy(self, with_ring: bool = True) -> "SimState":
        return SimState(
            y=self.y.copy(),
            eta=self.eta.copy(),
            ring=self.ring.copy() if (with_ring and self.ring is not None) else None,
            t=self.t,
            j=self.j,
            kernel=self.kernel,
            grid=self.grid,
            sgrid=self.sgrid,
            dt=self.dt,
            operators=self.operators,
            step_index=self.step_index,
        )


def build_state(grid: Grid, sgrid: SGrid, kernel: Kernel, j: int, y0: np.ndarray,
                y0_history: Optional[HistoryFn] = None, with_ring: bool = False) -> SimState:
    if j not in (0, 1, 2):
        raise ConfigurationError(f"j = {j} не из {{0, 1, 2}}", key="j")
    y0 = np.asarray(check_field(grid, y0), dtype=complex).copy()
    eta = init_history(y0_history, grid, sgrid)
    # буфер хранит y через полшага: шаг strang_cn кладёт в него два среза
    ring = YRingBuffer.from_history(y0_history, grid, sgrid.dt / 2.0, sgrid.s_max, y0) if with_ring else None
    return SimState(y=y0, eta=eta, ring=ring, t=0.0, j=j, kernel=kernel, grid=grid, sgrid=sgrid, dt=sgrid.dt)


def _ensure_operators(state: SimState, params: StepParams) -> StepOperators:
    ops = state.operators
    needs_cn = params.scheme is Scheme.STRANG_CN
    if ops is None or (needs_cn and ops.cn_solve is None) or (not needs_cn and ops.euler_solve is None):
        ops = build_operators(state.grid, state.sgrid, state.kernel, state.j, state.dt, params)
        state.operators = ops
    return ops


# =============================================================================
# ШАГ КРАНКА-НИКОЛСОНА
# =============================================================================

def step(state: SimState, params: StepParams) -> SimState:
    """
    Один шаг dt выбранной схемой; state обновляется на месте и возвращается.

    strang_cn: полушаг Кранка-Николсона, точный перенос истории на dt,
    второй полушаг по перенесённой истории. Приращение первого полушага
    копится и в узле s = 0 (с весом dt·g(0)) и переносом уходит в s = dt,
    поэтому η^{t+dt}(s) = η^t(s - dt) + ∫_t^{t+dt} y по двум трапециям.
    Оба полушага сохраняют E_j точно, перенос её не увеличивает.
    """
    if params.scheme is Scheme.IMPLICIT_EULER:
        return _implicit_euler_step(state, params)

    ops = _ensure_operators(state, params)
    dt = state.dt
    half = dt / 2.0
    y = state.y

    # первый полушаг от силы памяти в момент t
    force_now = memory_force(state.eta, state.kernel, state.j, state.grid)
    y_half = ops.inflow_solve(2.0 * y + half * force_now) - y
    shifted = advance_history(state.eta, (half / 2.0) * (y + y_half), dt)

    # второй полушаг по перенесённой истории
    force_shifted = memory_force(shifted, state.kernel, state.j, state.grid)
    y_next = ops.cn_solve(2.0 * y_half + half * force_shifted) - y_half
    if not (np.all(np.isfinite(y_half)) and np.all(np.isfinite(y_next))):
        raise NumericError(f"Решение расходится на шаге {state.step_index + 1}")

    shifted.values[1:] += (half / 2.0) * (y_half + y_next)[None, :]
    state.eta = shifted
    state.y = y_next
    state.t = (state.step_index + 1) * dt
    state.step_index += 1
    if state.ring is not None:
        state.ring.push(y_half)
        state.ring.push(y_next)
    return state


# =============================================================================
# РЕЗОЛЬВЕНТА И НЕЯВНЫЙ ЭЙЛЕР
# =============================================================================

def _upwind_gain(sgrid: SGrid, dt: float) -> np.ndarray:
    """a_m из рекурсии a_m = (dt + (dt/Δ_m) a_{m-1}) / (1 + dt/Δ_m), a_0 = 0."""
    gaps = np.diff(sgrid.nodes)
    gain = np.zeros(sgrid.size)
    for m in range(1, sgrid.size):
        ratio = dt / gaps[m - 1]
        gain[m] = (dt + ratio * gain[m - 1]) / (1.0 + ratio)
    return gain


def apply_generator(state: SimState) -> Tuple[np.ndarray, np.ndarray]:
    """
    𝒜U = (L y + (-1)^{j+1} ∫ g Δ^j η, -∂_s η + y) с разностью против потока по s.
    Строка s = 0 второй компоненты нулевая.
    """
    L = schrodinger_operator(state.grid)
    ay = L @ state.y + memory_force(state.eta, state.kernel, state.j, state.grid)
    values = state.eta.values
    gaps = np.diff(state.sgrid.nodes)
    aeta = np.zeros_like(values)
    aeta[1:] = -(values[1:] - values[:-1]) / gaps[:, None] + state.y[None, :]
    return ay, aeta


def resolvent_solve(state: SimState, rhs: Tuple[np.ndarray, np.ndarray], dt: float,
                    params: Optional[StepParams] = None) -> SimState:
    """
    Решает (I - dt 𝒜) U = F. История исключается: η_m = a_m y + b_m,
    остаётся эллиптическая задача для y. Возвращает новое состояние.
    """
    params = params or StepParams(scheme=Scheme.IMPLICIT_EULER)
    f1 = np.asarray(check_field(state.grid, rhs[0]), dtype=complex)
    f2 = np.asarray(rhs[1], dtype=complex)
    if f2.shape != state.eta.values.shape:
        raise ConfigurationError(f"Правая часть истории формы {f2.shape}, ожидалась {state.eta.values.shape}")

    sgn = (-1) ** (state.j + 1)
    weights = state.sgrid.g_weights_for(state.kernel)
    gaps = np.diff(state.sgrid.nodes)

    if (state.operators is not None and state.operators.euler_solve is not None
            and abs(dt - state.dt) <= 1e-12 * state.dt):
        ops = state.operators
        gain = ops.euler_gain
        solve = ops.euler_solve
        B = ops.memory_matrix
        L = ops.schrodinger
    else:
        gain = _upwind_gain(state.sgrid, dt)
        L = schrodinger_operator(state.grid)
        B = memory_operator(state.grid, state.j)
        matrix = sp.identity(state.grid.size, dtype=complex) - dt * L - dt * sgn * float(weights[1:] @ gain[1:]) * B
        solve = make_solver(matrix, params)

    offset = np.zeros_like(f2)
    for m in range(1, state.sgrid.size):
        ratio = dt / gaps[m - 1]
        offset[m] = (f2[m] + ratio * offset[m - 1]) / (1.0 + ratio)

    y_new = solve(f1 + dt * sgn * (B @ (weights @ offset)))
    eta_values = gain[:, None] * y_new[None, :] + offset
    eta_values[0] = 0.0

    result = state.copy(with_ring=False)
    result.y = y_new
    result.eta = HistoryField(eta_values, state.grid, state.sgrid)
    result.ring = state.ring

    ay, aeta = apply_generator(result)
    residual_y = y_new - dt * ay - f1
    residual_eta = (eta_values - dt * aeta - f2)[1:]
    scale = max(np.sqrt(np.linalg.norm(f1) ** 2 + np.linalg.norm(f2[1:]) ** 2), 1e-300)
    residual = float(np.sqrt(np.linalg.norm(residual_y) ** 2 + np.linalg.norm(residual_eta) ** 2) / scale)
    if residual > params.tol:
        raise NumericError(f"Невязка резольвенты {residual:.3e} выше {params.tol:.1e}", residual=residual)
    return result


def _implicit_euler_step(state: SimState, params: StepParams) -> SimState:
    _ensure_operators(state, params)
    solved = resolvent_solve(state, (state.y, state.eta.values), state.dt, params)
    if state.ring is not None:
        state.ring.push(0.5 * (state.y + solved.y))
    state.y = solved.y
    state.eta = solved.eta
    state.step_index += 1
    state.t = state.step_index * state.dt
    if state.ring is not None:
        state.ring.push(state.y)
    return state


# =============================================================================
# СРАВНЕНИЕ БЭКЕНДОВ ПАМЯТИ
# =============================================================================

def backend_difference(state: SimState) -> float:
    """‖F_η - F_direct‖ / (1 + ‖F_η‖) в дискретной L²-норме."""
    if state.ring is None:
        raise SimulationError("Для сравнения бэкендов нужен кольцевой буфер")
    transported = memory_force(state.eta, state.kernel, state.j, state.grid)
    direct = memory_force_direct(state.ring, state.kernel, state.j, state.grid)
    scale = 1.0 + norm_hj(state.grid, transported, 0)
    return norm_hj(state.grid, transported - direct, 0) / scale


def steps_for(T: float, dt: float) -> int:
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9 * max(T, dt):
        logger.warning(f"⚠️ T = {T} не кратно dt = {dt}, берём {steps} шагов")
    return steps


def progress_every(total_steps: int) -> int:
    return max(1, int(math.ceil(total_steps * constants.PROGRESS_FRACTION)))


# =============================================================================
# ПРОГОН
# =============================================================================

_MONITOR_FIELDS = ("h1", "h2", "bound", "m_bound_0", "m_bound_2", "convex")


def measure_baseline(state: SimState, params: StepParams, zeta0: Optional[HistoryField] = None,
                     eps0: Optional[float] = None) -> MonitorBaseline:
    """
    E_j(0), E_{j,1}(0), E_{j,2}(0). Производные берутся центральными
    разностями вокруг t = dt по двум пробным шагам на копии состояния,
    как и в записях прогона, чтобы ряды E_{j,k} были сравнимы.
    """
    trial = state.copy(with_ring=False)
    window = [StateSnapshot.of(trial)]
    for _ in range(2):
        window.append(StateSnapshot.of(step(trial, params)))
    state.operators = trial.operators

    energy0 = energy(state)
    energy1_0 = higher_energy(window, state.j, 1, state.grid, state.sgrid)[0]
    energy2_0 = higher_energy(window, state.j, 2, state.grid, state.sgrid)[0]
    return MonitorBaseline(
        energy0=energy0,
        energy1_0=energy1_0,
        energy2_0=energy2_0,
        eta0=state.eta.copy(),
        zeta0=zeta0,
        eps0=eps0 if eps0 is not None else default_eps0(energy0),
    )


def run(config) -> Trajectory:
    """
    Шаги от t = 0 до T с записью энергий каждые record_stride шагов
    (плюс t = 0 и последний шаг). Ошибка шага не выбрасывается:
    возвращается частичная траектория с пометкой error.
    """
    grid = config.make_grid()
    kernel = config.make_kernel()
    profile = config.make_profile()
    sgrid = build_sgrid(kernel, config.dt, config.s_uniform, config.s_ratio, config.tail_tol)
    y0 = config.make_initial_field(grid)
    history = config.make_history_profile(y0)
    params = config.step_params()

    state = build_state(grid, sgrid, kernel, config.j, y0, history.as_callable(),
                        with_ring=config.check_backends)
    zeta0 = None
    if config.j == 0 and config.snapshot_stride > 0:
        zeta0 = init_history(history.second_derivative_callable(), grid, sgrid)

    total_steps = steps_for(config.T, config.dt)
    stride = config.record_stride
    snap = config.snapshot_stride
    report_every = progress_every(total_steps)
    trajectory = Trajectory()
    pending = []

    logger.info(f"🚀 Прогон: {total_steps} шагов, dt = {config.dt}, j = {config.j}, ядро {kernel.describe()}")

    def is_record(k: int) -> bool:
        return k == 0 or k % stride == 0 or k == total_steps

    def is_snapshot(k: int) -> bool:
        return snap > 0 and k > 0 and k % snap == 0 and is_record(k)

    def record(k: int, previous: Optional[StateSnapshot]):
        rec = EnergyRecord(t=state.t, energy=energy(state), dissipation=dissipation_rhs(state))
        rec.monitors = lemma_monitors(state, baseline, profile)
        if k == 0 and snap > 0:
            rec.e1, rec.e2 = baseline.energy1_0, baseline.energy2_0
        elif is_snapshot(k):
            center = StateSnapshot.of(state)
            pending.append((rec, previous, center))
            if k == total_steps:
                # на последнем шаге окно замыкается лишним шагом на копии
                finalize(StateSnapshot.of(step(state.copy(with_ring=False), params)))
        trajectory.records.append(rec)

    def finalize(nxt: StateSnapshot):
        for rec, previous, center in pending:
            window = [previous, center, nxt]
            rec.e1 = higher_energy(window, state.j, 1, grid, sgrid)[0]
            rec.e2 = higher_energy(window, state.j, 2, grid, sgrid)[0]
            if zeta0 is not None and rec.monitors is not None:
                eta_tt = (nxt.eta - 2.0 * center.eta + previous.eta) / config.dt ** 2
                rec.monitors.m_bound_2 = history_ratio(grid, sgrid, 0, center.t, eta_tt, zeta0,
                                                       2.0 * baseline.energy2_0)
            if config.keep_snapshots:
                trajectory.snapshots.extend(window)
        pending.clear()

    backend_max = None
    try:
        baseline = measure_baseline(state, params, zeta0, config.eps0)
        backend_max = backend_difference(state) if state.ring is not None else None
        record(0, None)

        for k in range(1, total_steps + 1):
            previous = StateSnapshot.of(state) if is_snapshot(k) else None
            step(state, params)
            trajectory.steps = k
            if pending:
                finalize(StateSnapshot.of(state))
            if state.ring is not None:
                backend_max = max(backend_max, backend_difference(state))
            if is_record(k):
                record(k, previous)
            if k % report_every == 0:
                logger.info(f"📊 t = {state.t:.4g} ({100 * k // total_steps}%), E = {energy(state):.6e}")
    except SimulationError as error:
        trajectory.error = str(error)
        trajectory.error_exit_code = error.exit_code
        logger.error(f"❌ Прогон прерван на t = {state.t:.4g}: {error}")
    else:
        logger.info(f"✅ Прогон завершён: {len(trajectory.records)} записей")
    finally:
        pending.clear()

    trajectory.backend_max_diff = backend_max if config.check_backends and trajectory.records else None
    trajectory.monitor_maxima = monitor_maxima(trajectory)
    return trajectory


def monitor_maxima(trajectory: Trajectory) -> dict:
    """Максимум каждого монитора по записям (эмпирические константы прогона)."""
    maxima = {}
    for name in _MONITOR_FIELDS:
        values = [getattr(r.monitors, name) for r in trajectory.records
                  if r.monitors is not None and getattr(r.monitors, name) is not None]
        if values:
            maxima[name] = max(values)
    return maxima
