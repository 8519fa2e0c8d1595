#!/usr/bin/env python3
"""
Встроенные наборы проверок: kernels, operators, memory, identities, decay.
Каждая проверка возвращает CheckResult; строки PASS/FAIL печатаются в stdout.
"""

import logging
import math
from typing import Callable, Dict, List

import numpy as np
from scipy.linalg import eigh, eigvalsh

from config import constants
from config.experiment_config import parse_text
from core.decay_analysis import analyze_decay
from core.energy_meter import dissipation_rhs, energy
from core.errors import AdmissibilityError, SimulationError
from core.evolution import apply_generator, backend_difference, build_state, resolvent_solve, run, step
from core.kernel_toolkit import (
    build_Gn, eval_pn, make_exponential_kernel, make_linear_profile, make_null_kernel,
    make_polynomial_kernel, make_power_profile, make_prony_kernel, validate_assumptions,
)
from core.memory_engine import build_sgrid, init_history
from core.spatial_discretization import Grid, build_grid, inner, norms_squared, poincare_constant
from models.simulation import CheckResult, StepParams
from profiles import ConstantHistory, ExpDecayHistory, PolyBump, RandomBump

logger = logging.getLogger(__name__)

Check = Callable[[], CheckResult]

CLAMPED_BEAM_EIGENVALUE = 500.5639017
ORDER_THRESHOLD = 1.8
DECAY_RATE_THRESHOLD = 0.8


# =============================================================================
# ВСПОМОГАТЕЛЬНОЕ
# =============================================================================

def lowest_mode(grid: Grid, matrix=None) -> np.ndarray:
    """
    Собственный вектор симметричной матрицы (по умолчанию Δ²) с наименьшим
    собственным числом, ‖·‖ = 1.
    """
    matrix = grid.biharmonic if matrix is None else matrix
    _, vectors = eigh(matrix.toarray(), subset_by_index=[0, 0])
    mode = vectors[:, 0].astype(complex)
    return mode / math.sqrt(float(np.sum(np.abs(mode) ** 2)) * grid.volume)


def identity_residual(dt: float, t_star: float = 0.02) -> float:
    """
    Центральная разность dE/dt в t_star минус дискретная скорость диссипации.
    j = 0, g = e^{-s}, постоянная история, равномерная s-сетка. Начальное поле -
    собственный вектор Δ² - Δ, так что решение остаётся в одной моде.
    """
    grid = build_grid((1.0,), (64,))
    kernel = make_exponential_kernel(1.0, 1.0)
    sgrid = build_sgrid(kernel, dt, ratio=1.0, tail_tol=1e-8)
    y0 = lowest_mode(grid, grid.biharmonic - grid.laplacian)
    state = build_state(grid, sgrid, kernel, 0, y0, ConstantHistory(y0).as_callable())
    params = StepParams()

    k_star = int(round(t_star / dt))
    for _ in range(k_star - 1):
        step(state, params)
    before = energy(state)
    step(state, params)
    rate = dissipation_rhs(state)
    step(state, params)
    after = energy(state)
    return (after - before) / (2.0 * dt) - rate


def richardson_order(values: List[float]) -> float:
    """Порядок по трём значениям при шагах h, h/2, h/4."""
    coarse = abs(values[0] - values[1])
    fine = abs(values[1] - values[2])
    if fine == 0.0:
        return float("inf")
    return math.log2(coarse / fine)


def _config(text: str):
    return parse_text(text, source="<verify>")


# =============================================================================
# kernels
# =============================================================================

def check_gn_linear() -> CheckResult:
    profile = make_linear_profile(1.0)
    s = np.linspace(0.0, 10.0, 101)
    worst = 0.0
    for n in range(1, 5):
        gn = build_Gn(profile, n)
        worst = max(worst, float(np.max(np.abs(gn(s) - s ** n) / np.maximum(1.0, s ** n))))
    return CheckResult("gn_linear_closed_form", worst <= 1e-12, f"max rel err {worst:.2e}")


def check_gn_power() -> CheckResult:
    s = np.linspace(0.0, 10.0, 101)
    worst = 0.0
    for p, n in ((2.0, 2), (2.0, 3), (6.0, 2)):
        gn = build_Gn(make_power_profile(p), n)
        expected = (s / p) ** eval_pn(p, n)
        worst = max(worst, float(np.max(np.abs(gn(s) - expected) / np.maximum(1.0, expected))))
    return CheckResult("gn_power_closed_form", worst <= 1e-8, f"max rel err {worst:.2e}")


def check_polynomial_admissibility() -> CheckResult:
    try:
        make_polynomial_kernel(1.0, 2.0)
    except AdmissibilityError as error:
        return CheckResult("polynomial_q2_rejected", "q2" in str(error) or error.key == "q2", str(error))
    return CheckResult("polynomial_q2_rejected", False, "q2 = 2 принят")


def check_exponential_assumptions() -> CheckResult:
    report = validate_assumptions(make_exponential_kernel(1.0, 1.0), make_linear_profile(1.0))
    passed = report.relaxation_ok and report.density_ok and report.tail_vanishes and report.exponential_rate_ok
    return CheckResult("exponential_assumptions", bool(passed), f"∫g = {report.g0_quadrature:.8f}")


def check_polynomial_assumptions() -> CheckResult:
    report = validate_assumptions(make_polynomial_kernel(1.0, 4.0), make_power_profile(6.0))
    passed = report.relaxation_ok and report.density_ok and report.convexity_finite
    return CheckResult("polynomial_convexity_finite", bool(passed),
                       f"integral {report.convexity_integral}, sup {report.convexity_sup}")


# =============================================================================
# operators
# =============================================================================

def check_poincare() -> CheckResult:
    grid = build_grid((1.0,), (256,))
    c_star = poincare_constant(grid)
    oracle = 1.0 / float(eigvalsh(-grid.laplacian.toarray(), subset_by_index=[0, 0])[0])
    finer = poincare_constant(build_grid((1.0,), (512,)))
    eig_err = abs(c_star - oracle) / oracle
    grid_err = abs(c_star - finer) / finer
    return CheckResult("poincare_constant", eig_err <= 0.01 and grid_err <= 0.02,
                       f"c* = {c_star:.6f}, vs eigensolve {eig_err:.1e}, vs N=512 {grid_err:.1e}")


def check_poincare_scaling() -> CheckResult:
    unit = poincare_constant(build_grid((1.0,), (64,)))
    doubled = poincare_constant(build_grid((2.0,), (64,)))
    ratio = doubled / unit
    return CheckResult("poincare_scaling", abs(ratio - 4.0) <= 1e-8 * 4.0, f"c*(2L)/c*(L) = {ratio:.10f}")


def check_clamped_eigenvalue() -> CheckResult:
    grid = build_grid((1.0,), (128,))
    lowest = float(eigvalsh(grid.biharmonic.toarray(), subset_by_index=[0, 0])[0])
    err = abs(lowest - CLAMPED_BEAM_EIGENVALUE) / CLAMPED_BEAM_EIGENVALUE
    return CheckResult("clamped_beam_eigenvalue", err <= 0.01, f"λ₁ = {lowest:.4f}")


def check_operator_symmetry() -> CheckResult:
    grid = build_grid((1.0, 1.0), (12, 12))
    lap_asym = float(abs(grid.laplacian - grid.laplacian.T).max())
    bih_asym = float(abs(grid.biharmonic - grid.biharmonic.T).max())
    lowest = float(eigvalsh(grid.biharmonic.toarray(), subset_by_index=[0, 0])[0])
    scale = float(abs(grid.biharmonic).max())
    passed = lap_asym <= 1e-12 * scale and bih_asym <= 1e-12 * scale and lowest > 0
    return CheckResult("operator_symmetry", passed, f"λ_min(Δ²) = {lowest:.4e}")


def check_gradient_norm() -> CheckResult:
    grid = build_grid((1.0,), (64,))
    u = RandomBump(seed=3).evaluate(grid)
    via_gradient = float(norms_squared(grid, u[None, :], 1)[0])
    via_laplacian = inner(grid, -(grid.laplacian @ u), u)
    err = abs(via_gradient - via_laplacian) / via_laplacian
    return CheckResult("gradient_norm_identity", err <= 1e-12, f"rel err {err:.1e}")


# =============================================================================
# memory
# =============================================================================

def check_constant_history() -> CheckResult:
    grid = build_grid((1.0,), (16,))
    kernel = make_exponential_kernel(1.0, 1.0)
    sgrid = build_sgrid(kernel, 1e-3)
    phi = PolyBump().evaluate(grid)
    history = init_history(ConstantHistory(phi), grid, sgrid)
    expected = sgrid.nodes[:, None] * phi[None, :]
    err = float(np.max(np.abs(history.values - expected)) / np.max(np.abs(expected)))
    return CheckResult("constant_history_exact", err <= 1e-12, f"max rel err {err:.1e}")


def check_truncated_mass() -> CheckResult:
    kernel = make_exponential_kernel(1.0, 1.0)
    sgrid = build_sgrid(kernel, 1e-2, tail_tol=1e-10)
    passed = sgrid.truncated_mass <= 1e-10 * kernel.eval_f(0.0) and math.isclose(
        sgrid.truncated_mass, float(kernel.eval_f(sgrid.s_max)))
    return CheckResult("truncated_mass", bool(passed), f"s_max = {sgrid.s_max:g}, f(s_max) = {sgrid.truncated_mass:.2e}")


def check_backend_equivalence() -> CheckResult:
    """Перенос истории и прямая свёртка с кольцевым буфером на 100 шагах."""
    grid = build_grid((1.0,), (16,))
    kernel = make_prony_kernel([(1.0, 1.0), (0.5, 3.0)])
    dt = 5e-4
    sgrid = build_sgrid(kernel, dt, ratio=1.0)
    y0 = RandomBump(seed=7).evaluate(grid)
    state = build_state(grid, sgrid, kernel, 0, y0, ExpDecayHistory(y0, 1.0).as_callable(), with_ring=True)
    params = StepParams()

    worst = backend_difference(state)
    for _ in range(100):
        step(state, params)
        worst = max(worst, backend_difference(state))
    return CheckResult("backend_equivalence", worst <= 1e-6, f"max difference {worst:.2e}")


# =============================================================================
# identities
# =============================================================================

def check_conservation() -> CheckResult:
    grid = build_grid((1.0,), (64,))
    kernel = make_null_kernel()
    dt = 1e-3
    sgrid = build_sgrid(kernel, dt)
    state = build_state(grid, sgrid, kernel, 0, PolyBump().evaluate(grid))
    params = StepParams()
    norm0 = math.sqrt(2.0 * energy(state))
    drift = 0.0
    for _ in range(1000):
        step(state, params)
        drift = max(drift, abs(math.sqrt(2.0 * energy(state)) - norm0) / norm0)
    return CheckResult("conservation", drift <= constants.CONSERVATION_RTOL, f"max drift {drift:.2e}")


def check_energy_identity() -> CheckResult:
    residuals = [identity_residual(dt) for dt in (2e-3, 1e-3, 5e-4)]
    order = richardson_order(residuals)
    return CheckResult("energy_identity_order", order >= ORDER_THRESHOLD,
                       f"order {order:.3f}, residuals {', '.join(f'{r:.2e}' for r in residuals)}")


def check_monotone_energy() -> CheckResult:
    worst = -math.inf
    for j in (0, 1, 2):
        grid = build_grid((1.0,), (32,))
        kernel = make_exponential_kernel(1.0, 1.0)
        sgrid = build_sgrid(kernel, 1e-3)
        state = build_state(grid, sgrid, kernel, j, PolyBump().evaluate(grid))
        params = StepParams()
        previous = energy(state)
        band = constants.MONOTONE_RTOL * previous
        for _ in range(200):
            step(state, params)
            current = energy(state)
            worst = max(worst, (current - previous) / band)
            previous = current
    return CheckResult("energy_monotone", worst <= 1.0, f"max increase {worst:.2e} of band")


def check_resolvent_round_trip() -> CheckResult:
    grid = build_grid((1.0,), (32,))
    kernel = make_exponential_kernel(1.0, 1.0)
    dt = 1e-3
    sgrid = build_sgrid(kernel, dt)
    y0 = PolyBump().evaluate(grid)
    worst = 0.0
    for j in (0, 1, 2):
        state = build_state(grid, sgrid, kernel, j, y0, ExpDecayHistory(y0, 1.0).as_callable())
        ay, aeta = apply_generator(state)
        rhs = (state.y - dt * ay, state.eta.values - dt * aeta)
        solved = resolvent_solve(state, rhs, dt)
        diff = math.hypot(np.linalg.norm(solved.y - state.y), np.linalg.norm(solved.eta.values - state.eta.values))
        scale = math.hypot(np.linalg.norm(state.y), np.linalg.norm(state.eta.values))
        worst = max(worst, diff / scale)
    return CheckResult("resolvent_round_trip", worst <= 1e-10, f"max rel err {worst:.1e}")


# =============================================================================
# decay
# =============================================================================

DECAY_TEMPLATE = """
lengths = 10
counts = 64
kernel = {kernel}
T = 100
dt = 0.01
record_stride = 100
fit_t0 = 10
fit_t1 = 100
"""


def _decay_report(kernel_line: str):
    config = _config(DECAY_TEMPLATE.format(kernel=kernel_line))
    trajectory = run(config)
    if not trajectory.ok:
        raise SimulationError(trajectory.error)
    profile = config.make_profile()
    return analyze_decay(trajectory.records, build_Gn(profile, config.n), profile,
                         config.fit_t0, config.fit_t1)


def check_exponential_decay() -> CheckResult:
    report = _decay_report("exponential")
    passed = report.rate >= DECAY_RATE_THRESHOLD and report.holds and report.alpha is not None
    return CheckResult("exponential_decay_rate", bool(passed),
                       f"r = {report.rate:.3f}, R² = {report.r_squared:.3f}, α = {report.alpha}")


def check_polynomial_envelope() -> CheckResult:
    report = _decay_report("polynomial\nq2 = 4")
    passed = report.holds and report.alpha is not None
    return CheckResult("polynomial_envelope", bool(passed), f"r = {report.rate:.3f}, α = {report.alpha}")


HIGHER_ENERGY_CONFIG = """
lengths = 10
counts = 64
kernel = exponential
T = 20
dt = 0.01
record_stride = 100
snapshot_stride = 100
"""


def check_higher_energies() -> CheckResult:
    config = _config(HIGHER_ENERGY_CONFIG)
    trajectory = run(config)
    details = []
    passed = trajectory.ok
    for name in ("e1", "e2"):
        series = [getattr(r, name) for r in trajectory.records if getattr(r, name) is not None]
        if len(series) < 2:
            passed = False
            details.append(f"{name}: нет данных")
            continue
        band = constants.HIGHER_ENERGY_BAND * series[0]
        increase = max((b - a for a, b in zip(series, series[1:])), default=0.0)
        passed = passed and increase <= band
        details.append(f"{name}: {len(series)} точек")
    return CheckResult("higher_energies_monotone", bool(passed), ", ".join(details))


# =============================================================================
# РЕЕСТР
# =============================================================================

SUITES: Dict[str, List[Check]] = {
    "kernels": [check_gn_linear, check_gn_power, check_polynomial_admissibility,
                check_exponential_assumptions, check_polynomial_assumptions],
    "operators": [check_poincare, check_poincare_scaling, check_clamped_eigenvalue,
                  check_operator_symmetry, check_gradient_norm],
    "memory": [check_constant_history, check_truncated_mass, check_backend_equivalence],
    "identities": [check_conservation, check_energy_identity, check_monotone_energy,
                   check_resolvent_round_trip],
    "decay": [check_exponential_decay, check_polynomial_envelope, check_higher_energies],
}


def run_suite(name: str) -> List[CheckResult]:
    """Исключение внутри проверки превращается в FAIL с текстом ошибки."""
    if name == "all":
        return [result for suite in SUITES for result in run_suite(suite)]
    if name not in SUITES:
        raise KeyError(name)

    results = []
    for check in SUITES[name]:
        logger.info(f"🔍 {name}: {check.__name__}")
        try:
            result = check()
        except (SimulationError, ArithmeticError) as error:
            result = CheckResult(check.__name__.replace("check_", ""), False, f"{type(error).__name__}: {error}")
        print(result, flush=True)
        results.append(result)
    return results


def verify(name: str) -> int:
    results = run_suite(name)
    failed = [r for r in results if not r.passed]
    if failed:
        logger.warning(f"⚠️ {name}: провалено {len(failed)} из {len(results)}")
        return 1
    logger.info(f"✅ {name}: все {len(results)} проверок пройдены")
    return 0
