# core/memory_engine.py
"""
История η^t(x, s) = ∫_{t-s}^t y(x, τ) dτ и сила памяти.

Два независимых способа считать силу памяти:
- через перенос истории: (-1)^{j+1} Σ w_m g(s_m) Δ^j η(·, s_m)
- прямой свёрткой с f по кольцевому буферу прошлых y
После интегрирования по частям (∂_s η = y(t - s)) они совпадают.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from config import constants
from core.errors import ConfigurationError, ShapeError, StateError
from core.kernel_toolkit import Kernel
from core.spatial_discretization import Grid, check_field, grid_points, memory_operator

logger = logging.getLogger(__name__)

# y0_history(points (n, d), taus (T,)) -> (T, n)
HistoryFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

_CHUNK = 2048


# =============================================================================
# S-СЕТКА
# =============================================================================

@dataclass(frozen=True, eq=False)
class SGrid:
    """
    Узлы 0 = s_0 < ... < s_M: сначала шаг ровно dt, затем плавный рост шага
    до геометрического.
    Для каждого узла заранее найдено, где лежит s_m - dt (индекс и доля).
    """
    nodes: np.ndarray
    dt: float
    weights: np.ndarray
    uniform_count: int
    shift_index: np.ndarray = field(repr=False)
    shift_theta: np.ndarray = field(repr=False)
    kernel: Kernel = field(repr=False)
    g_values: np.ndarray = field(repr=False)
    g_prime_values: np.ndarray = field(repr=False)

    @property
    def s_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def g_weights(self) -> np.ndarray:
        return self.weights * self.g_values

    @property
    def g_prime_weights(self) -> np.ndarray:
        return self.weights * self.g_prime_values

    @property
    def truncated_mass(self) -> float:
        """f(s_max): масса g, отброшенная усечением."""
        return float(self.kernel.eval_f(self.s_max))

    def g_weights_for(self, kernel: Kernel) -> np.ndarray:
        if kernel is self.kernel:
            return self.g_weights
        return self.weights * np.asarray(kernel.eval_g(self.nodes), dtype=float)


def _tail_cutoff(kernel: Kernel, start: float, tail_tol: float) -> float:
    """Наименьшее s = start·2^k, при котором g(s) < tail_tol·g(0)."""
    g_zero = float(kernel.eval_g(0.0))
    s = start
    while float(kernel.eval_g(s)) >= tail_tol * g_zero:
        s *= 2.0
        if s > constants.S_MAX_CAP:
            raise ConfigurationError(
                f"Хвост ядра {kernel.describe()} не опускается ниже {tail_tol}·g(0) до s = {constants.S_MAX_CAP}",
                key="tail_tol",
            )
    return s


def _graded_nodes(kernel: Kernel, start: float, dt: float, ratio: float, s_max: float) -> list:
    """
    Узлы после равномерного участка. Отношение соседних шагов r_k растёт
    до ratio, но так, что (1 + r_k) g(s_k) не возрастает по k: тогда вес
    трапеции w_k g(s_k) на единицу шага не растёт и перенос истории
    с линейной интерполяцией не увеличивает энергию.
    """
    nodes = []
    s, gap, local = start, dt, 1.0
    g_prev = float(kernel.eval_g(start - dt))
    g_here = float(kernel.eval_g(start))
    while s < s_max - 1e-9 * dt:
        if g_here > 0:
            local = min(ratio, (1.0 + local) * g_prev / g_here - 1.0)
        else:
            local = ratio
        local = max(local, 1.0)
        gap *= local
        s += gap
        nodes.append(s)
        g_prev, g_here = g_here, float(kernel.eval_g(s))
    return nodes


def build_sgrid(kernel: Kernel, dt: float, s_uniform: float = constants.DEFAULT_S_UNIFORM,
                ratio: float = constants.DEFAULT_S_RATIO,
                tail_tol: float = constants.DEFAULT_TAIL_TOL) -> SGrid:
    """ratio = 1 даёт полностью равномерную сетку с шагом dt."""
    if not dt > 0:
        raise ConfigurationError(f"dt = {dt} должен быть положительным", key="dt")
    if ratio < 1:
        raise ConfigurationError(f"s_ratio = {ratio} должен быть не меньше 1", key="s_ratio")

    if kernel.is_memoryless:
        nodes = np.array([0.0, dt])
        uniform_count = 2
    else:
        s_max = _tail_cutoff(kernel, max(s_uniform, dt), tail_tol)
        uniform_end = s_max if ratio == 1.0 else min(s_uniform, s_max)
        fine_steps = int(math.ceil(uniform_end / dt - 1e-9))
        nodes_list = list(np.arange(fine_steps + 1) * dt)
        uniform_count = len(nodes_list)
        nodes_list.extend(_graded_nodes(kernel, nodes_list[-1], dt, ratio, s_max))
        nodes = np.array(nodes_list)

    gaps = np.diff(nodes)
    weights = np.zeros_like(nodes)
    weights[:-1] += gaps / 2.0
    weights[1:] += gaps / 2.0

    # где лежит s_m - dt
    index = np.zeros(len(nodes), dtype=int)
    theta = np.zeros(len(nodes))
    targets = nodes[1:] - dt
    found = np.searchsorted(nodes, targets, side="right") - 1
    found = np.clip(found, 0, len(nodes) - 2)
    index[1:] = found
    theta[1:] = np.clip((targets - nodes[found]) / gaps[found], 0.0, 1.0)
    index[1:uniform_count] = np.arange(uniform_count - 1)
    theta[1:uniform_count] = 0.0

    sgrid = SGrid(
        nodes=nodes,
        dt=float(dt),
        weights=weights,
        uniform_count=uniform_count,
        shift_index=index,
        shift_theta=theta,
        kernel=kernel,
        g_values=np.asarray(kernel.eval_g(nodes), dtype=float),
        g_prime_values=np.asarray(kernel.eval_g_prime(nodes), dtype=float),
    )
    logger.debug(f"📐 s-сетка: {len(nodes)} узлов, s_max = {sgrid.s_max:.4g}, равномерных {uniform_count}")
    return sgrid


# =============================================================================
# ИСТОРИЯ
# =============================================================================

@dataclass
class HistoryField:
    """Значения η(x_i, s_m), массив (M+1, n); строка 0 всегда нулевая."""
    values: np.ndarray
    grid: Grid
    sgrid: SGrid

    def copy(self) -> "HistoryField":
        return HistoryField(self.values.copy(), self.grid, self.sgrid)

    def interpolate(self, s: float) -> np.ndarray:
        """η(·, s) линейной интерполяцией; за s_max продолжается последним отрезком."""
        nodes = self.sgrid.nodes
        if s <= 0:
            return np.zeros(self.grid.size, dtype=complex)
        k = int(np.searchsorted(nodes, s, side="right") - 1)
        k = min(max(k, 0), len(nodes) - 2)
        theta = (s - nodes[k]) / (nodes[k + 1] - nodes[k])
        return (1.0 - theta) * self.values[k] + theta * self.values[k + 1]

    def interpolate_many(self, s: np.ndarray) -> np.ndarray:
        """η(·, s_k) для массива s, результат (K, n); при s ≤ 0 нули."""
        nodes = self.sgrid.nodes
        s = np.asarray(s, dtype=float)
        k = np.clip(np.searchsorted(nodes, s, side="right") - 1, 0, len(nodes) - 2)
        theta = ((s - nodes[k]) / (nodes[k + 1] - nodes[k]))[:, None]
        values = (1.0 - theta) * self.values[k] + theta * self.values[k + 1]
        values[s <= 0] = 0.0
        return values


def zero_history(grid: Grid, sgrid: SGrid) -> HistoryField:
    return HistoryField(np.zeros((sgrid.size, grid.size), dtype=complex), grid, sgrid)


def init_history(y0_history: Optional[HistoryFn], grid: Grid, sgrid: SGrid) -> HistoryField:
    """
    η⁰(x, s_m) = ∫_0^{s_m} y0(x, τ) dτ, составная трапеция по τ с шагом dt.
    Интегрируем блоками, чтобы не держать в памяти всю ось τ.
    """
    history = zero_history(grid, sgrid)
    if y0_history is None:
        return history

    points = grid_points(grid)
    dt = sgrid.dt
    nodes = sgrid.nodes
    total = int(math.ceil(sgrid.s_max / dt - 1e-9))
    accumulated = np.zeros(grid.size, dtype=complex)
    node = 1

    for start in range(0, total, _CHUNK):
        stop = min(start + _CHUNK, total)
        taus = np.arange(start, stop + 1) * dt
        samples = np.asarray(y0_history(points, taus), dtype=complex)
        cumulative = accumulated + cumulative_trapezoid(samples, dx=dt, axis=0, initial=0.0)

        while node < len(nodes) and nodes[node] <= taus[-1] + 1e-9 * dt:
            position = (nodes[node] - taus[0]) / dt
            k = min(int(math.floor(position)), len(taus) - 2)
            theta = position - k
            history.values[node] = (1.0 - theta) * cumulative[k] + theta * cumulative[k + 1]
            node += 1
        accumulated = cumulative[-1]

    return history


def shift_history(h: HistoryField) -> np.ndarray:
    """η(s_m - dt) на всех узлах; строка 0 нулевая."""
    sgrid = h.sgrid
    uniform = sgrid.uniform_count
    shifted = np.zeros_like(h.values)
    # на равномерном участке перенос - сдвиг на одну строку
    shifted[1:uniform] = h.values[:uniform - 1]
    index = sgrid.shift_index[uniform:]
    theta = sgrid.shift_theta[uniform:, None]
    shifted[uniform:] = (1.0 - theta) * h.values[index] + theta * h.values[index + 1]
    return shifted


def advance_history(h: HistoryField, y_new_integral: np.ndarray, dt: float) -> HistoryField:
    """η^{t+dt}(s) = η^t(s - dt) + ∫_t^{t+dt} y для s ≥ dt, η(0) = 0."""
    if abs(dt - h.sgrid.dt) > 1e-12 * h.sgrid.dt:
        raise ConfigurationError(f"dt = {dt} не совпадает с шагом s-сетки {h.sgrid.dt}", key="dt")
    increment = check_field(h.grid, y_new_integral)
    values = shift_history(h)
    values[1:] += increment[None, :]
    return HistoryField(values, h.grid, h.sgrid)


def memory_force(h: HistoryField, kernel: Kernel, j: int, grid: Grid) -> np.ndarray:
    """(-1)^{j+1} Σ w_m g(s_m) Δ^j η(·, s_m)"""
    if h.values.shape[1] != grid.size:
        raise ShapeError(f"История на {h.values.shape[1]} узлах, сетка на {grid.size}")
    combined = h.sgrid.g_weights_for(kernel) @ h.values
    return (-1) ** (j + 1) * (memory_operator(grid, j) @ combined)


# =============================================================================
# КОЛЬЦЕВОЙ БУФЕР ПРОШЛЫХ y
# =============================================================================

class YRingBuffer:
    """
    Срезы y(·, t - k dt) для k = 0..K, K = ⌈s_max / dt⌉, где dt - шаг буфера
    (в прогоне это половина шага по времени).
    cursor указывает на текущий срез (k = 0).
    """

    def __init__(self, grid: Grid, dt: float, s_max: float):
        self.grid = grid
        self.dt = float(dt)
        self.depth = int(math.ceil(s_max / dt - 1e-9))
        self.capacity = self.depth + 1
        self.data = np.zeros((self.capacity, grid.size), dtype=complex)
        self.cursor = -1
        self.filled = 0

    def push(self, y: np.ndarray):
        self.cursor = (self.cursor + 1) % self.capacity
        self.data[self.cursor] = check_field(self.grid, y)
        self.filled = min(self.filled + 1, self.capacity)

    def slice(self, k: int) -> np.ndarray:
        if k >= self.filled:
            raise StateError(f"В буфере {self.filled} срезов, запрошен сдвиг {k}")
        return self.data[(self.cursor - k) % self.capacity]

    def ordered(self) -> np.ndarray:
        """Срезы от текущего к самому старому, массив (K+1, n)."""
        if self.filled < self.capacity:
            raise StateError(f"Буфер заполнен на {self.filled} из {self.capacity}")
        order = (self.cursor - np.arange(self.capacity)) % self.capacity
        return self.data[order]

    def copy(self) -> "YRingBuffer":
        clone = YRingBuffer.__new__(YRingBuffer)
        clone.grid = self.grid
        clone.dt = self.dt
        clone.depth = self.depth
        clone.capacity = self.capacity
        clone.data = self.data.copy()
        clone.cursor = self.cursor
        clone.filled = self.filled
        return clone

    @classmethod
    def from_history(cls, y0_history: Optional[HistoryFn], grid: Grid, dt: float,
                     s_max: float, y_current: np.ndarray) -> "YRingBuffer":
        """Срез k ≥ 1 равен y0(x, k dt), срез 0 равен текущему y."""
        buffer = cls(grid, dt, s_max)
        taus = np.arange(buffer.depth, 0, -1) * dt
        if y0_history is None:
            past = np.zeros((len(taus), grid.size), dtype=complex)
        else:
            past = np.asarray(y0_history(grid_points(grid), taus), dtype=complex)
        for row in past:
            buffer.push(row)
        buffer.push(y_current)
        return buffer


def memory_force_direct(buf: YRingBuffer, kernel: Kernel, j: int, grid: Grid) -> np.ndarray:
    """(-1)^{j+1} Σ_k ŵ_k f(k dt) Δ^j y(·, t - k dt), трапеция по k."""
    slices = buf.ordered()
    lags = np.arange(buf.capacity) * buf.dt
    weights = np.full(buf.capacity, buf.dt)
    weights[0] = weights[-1] = buf.dt / 2.0
    combined = (weights * np.asarray(kernel.eval_f(lags), dtype=float)) @ slices
    return (-1) ** (j + 1) * (memory_operator(grid, j) @ combined)
