# core/spatial_discretization.py
"""
Равномерная сетка на Ω = (0,L1)×...×(0,Ld), d ∈ {1, 2}, с защемлёнными
граничными условиями y = ∇y = 0.

Храним только внутренние узлы x_i = (i+1) h, h = L / (N+1).
Граничное значение равно нулю, заграничный узел зеркалит первый внутренний
(u_{-1} = u_1), отсюда 7 в угловых элементах одномерного Δ².
Двумерный порядок узлов: index = ix * Ny + iy.
"""

import logging
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from config import constants
from core.errors import NumericError, ResolutionError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Grid:
    dimension: int
    lengths: Tuple[float, ...]
    counts: Tuple[int, ...]
    spacing: Tuple[float, ...]
    laplacian: sp.csr_matrix = field(repr=False)
    biharmonic: sp.csr_matrix = field(repr=False)
    gradients: Tuple[sp.csr_matrix, ...] = field(repr=False)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def volume(self) -> float:
        """Вес узла Π h_i в скалярном произведении."""
        return float(np.prod(self.spacing))

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.counts)


# =============================================================================
# ОДНОМЕРНЫЕ БЛОКИ
# =============================================================================

def _second_difference(n: int, h: float) -> sp.csr_matrix:
    """Дирихле-Лапласиан (1, -2, 1) / h²."""
    return sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n), format="lil").tocsr() / h ** 2


def _clamped_fourth_difference(n: int, h: float) -> sp.csr_matrix:
    """(1, -4, 6, -4, 1) / h⁴ с зеркальными граничными строками."""
    d4 = sp.diags([1.0, -4.0, 6.0, -4.0, 1.0], [-2, -1, 0, 1, 2], shape=(n, n), format="lil")
    d4[0, 0] = 7.0
    d4[n - 1, n - 1] = 7.0
    return d4.tocsr() / h ** 4


def _forward_difference(n: int, h: float) -> sp.csr_matrix:
    """(N+1)×N разности вперёд с нулевым продолжением за границу."""
    rows = np.arange(n + 1)
    plus = sp.coo_matrix((np.ones(n), (rows[:n], np.arange(n))), shape=(n + 1, n))
    minus = sp.coo_matrix((-np.ones(n), (rows[1:], np.arange(n))), shape=(n + 1, n))
    return (plus + minus).tocsr() / h


# =============================================================================
# ПОСТРОЕНИЕ СЕТКИ
# =============================================================================

def build_grid(lengths: Sequence[float], counts: Sequence[int]) -> Grid:
    lengths = tuple(float(x) for x in lengths)
    counts = tuple(int(c) for c in counts)
    dimension = len(lengths)

    if dimension not in (1, 2) or len(counts) != dimension:
        raise ShapeError(f"Нужна размерность 1 или 2, получено lengths={lengths}, counts={counts}")
    if any(L <= 0 for L in lengths):
        raise ShapeError(f"Длины должны быть положительными: {lengths}")
    if any(c < constants.MIN_INTERIOR_POINTS for c in counts):
        raise ResolutionError(
            f"Нужно не меньше {constants.MIN_INTERIOR_POINTS} внутренних узлов, получено {counts}",
            key="counts",
        )

    spacing = tuple(L / (c + 1) for L, c in zip(lengths, counts))
    d2 = [_second_difference(c, h) for c, h in zip(counts, spacing)]
    d4 = [_clamped_fourth_difference(c, h) for c, h in zip(counts, spacing)]
    dp = [_forward_difference(c, h) for c, h in zip(counts, spacing)]

    if dimension == 1:
        laplacian = d2[0]
        biharmonic = d4[0]
        gradients = (dp[0],)
    else:
        ix = sp.identity(counts[0], format="csr")
        iy = sp.identity(counts[1], format="csr")
        laplacian = sp.kron(d2[0], iy) + sp.kron(ix, d2[1])
        # 13-точечный шаблон: Δ²_x + 2 Δ_x Δ_y + Δ²_y
        biharmonic = sp.kron(d4[0], iy) + 2.0 * sp.kron(d2[0], d2[1]) + sp.kron(ix, d4[1])
        gradients = (sp.kron(dp[0], iy).tocsr(), sp.kron(ix, dp[1]).tocsr())

    grid = Grid(
        dimension=dimension,
        lengths=lengths,
        counts=counts,
        spacing=spacing,
        laplacian=sp.csr_matrix(laplacian),
        biharmonic=sp.csr_matrix(biharmonic),
        gradients=tuple(gradients),
    )
    logger.debug(f"🧮 Сетка {counts} на {lengths}, h = {spacing}")
    return grid


def grid_points(grid: Grid) -> np.ndarray:
    """Координаты внутренних узлов, массив (n, d)."""
    axes = [np.arange(1, c + 1) * h for c, h in zip(grid.counts, grid.spacing)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


# =============================================================================
# ПРИМЕНЕНИЕ ОПЕРАТОРОВ
# =============================================================================

def check_field(grid: Grid, field: np.ndarray) -> np.ndarray:
    field = np.asarray(field)
    if field.ndim == 0 or field.shape[0] != grid.size:
        raise ShapeError(f"Поле формы {field.shape} не лежит на сетке из {grid.size} узлов")
    return field


def apply_laplacian(grid: Grid, field: np.ndarray) -> np.ndarray:
    return grid.laplacian @ check_field(grid, field)


def apply_biharmonic(grid: Grid, field: np.ndarray) -> np.ndarray:
    return grid.biharmonic @ check_field(grid, field)


def memory_operator(grid: Grid, j: int) -> sp.csr_matrix:
    """Δ^j: I, Δ или Δ² для j = 0, 1, 2."""
    if j == 0:
        return sp.identity(grid.size, format="csr")
    if j == 1:
        return grid.laplacian
    if j == 2:
        return grid.biharmonic
    raise ShapeError(f"Порядок памяти j = {j} не из {{0, 1, 2}}")


# =============================================================================
# СКАЛЯРНОЕ ПРОИЗВЕДЕНИЕ И НОРМЫ
# =============================================================================

def inner(grid: Grid, u: np.ndarray, v: np.ndarray) -> float:
    """Re Σ u v̄ Π h"""
    return float(np.real(np.vdot(check_field(grid, v), check_field(grid, u))) * grid.volume)


def norms_squared(grid: Grid, batch: np.ndarray, j: int) -> np.ndarray:
    """
    ‖Δ^{j/2} u_m‖² для каждой строки batch формы (M, n).
    j = 2 берётся как ⟨Δ² u, u⟩: это норма защемлённого лапласиана
    с весом 1/2 в граничных узлах.
    """
    batch = np.atleast_2d(batch)
    if batch.shape[1] != grid.size:
        raise ShapeError(f"Пакет формы {batch.shape} не лежит на сетке из {grid.size} узлов")
    if j == 0:
        values = np.sum(np.abs(batch) ** 2, axis=1)
    elif j == 1:
        values = np.zeros(batch.shape[0])
        for grad in grid.gradients:
            values += np.sum(np.abs(grad @ batch.T) ** 2, axis=0)
    elif j == 2:
        values = np.real(np.sum(np.conj(batch.T) * (grid.biharmonic @ batch.T), axis=0))
        values = np.maximum(values, 0.0)
    else:
        raise ShapeError(f"Норма порядка j = {j} не определена")
    return values * grid.volume


def norm_hj(grid: Grid, field: np.ndarray, j: int) -> float:
    check_field(grid, field)
    return float(np.sqrt(norms_squared(grid, np.asarray(field)[None, :], j)[0]))


# =============================================================================
# КОНСТАНТА ПУАНКАРЕ
# =============================================================================

def poincare_constant(grid: Grid, tol: float = constants.POINCARE_TOL,
                      max_iter: int = constants.POINCARE_MAX_ITER) -> float:
    """c* = 1 / λ_min(-Δ) обратными степенными итерациями."""
    operator = (-grid.laplacian).tocsc()
    lu = splu(operator)
    v = np.ones(grid.size) / np.sqrt(grid.size)
    eigenvalue = float(v @ (operator @ v))

    change = float("inf")
    for iteration in range(1, max_iter + 1):
        w = lu.solve(v)
        v = w / np.linalg.norm(w)
        updated = float(v @ (operator @ v))
        change = abs(updated - eigenvalue)
        if change <= tol * abs(updated):
            logger.debug(f"✅ Пуанкаре: λ_min = {updated:.10g} за {iteration} итераций")
            return 1.0 / updated
        eigenvalue = updated

    raise NumericError(
        f"Обратные итерации не сошлись за {max_iter} шагов",
        residual=change,
    )


def schrodinger_operator(grid: Grid) -> sp.csr_matrix:
    """L = i(Δ - Δ²)"""
    return (1j * (grid.laplacian - grid.biharmonic)).tocsr()
