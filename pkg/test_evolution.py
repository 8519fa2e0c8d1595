# test_evolution.py
import math

import numpy as np
import pytest

from config.experiment_config import parse_text
from config.settings import settings
from core import evolution
from core.energy_meter import energy
from core.errors import ConfigurationError, NumericError
from core.evolution import (
    apply_generator, backend_difference, build_state, resolvent_solve, run, step, steps_for,
)
from core.kernel_toolkit import make_exponential_kernel, make_null_kernel, make_prony_kernel
from core.memory_engine import build_sgrid
from core.spatial_discretization import build_grid
from models.simulation import Scheme, StepParams
from profiles import ConstantHistory, ExpDecayHistory, PolyBump, RandomBump
from services.verification.verify_suites import identity_residual, lowest_mode, richardson_order


# =============================================================================
# СОХРАНЕНИЕ И ДИССИПАЦИЯ
# =============================================================================

def test_conservation_without_memory():
    grid = build_grid((1.0,), (64,))
    kernel = make_null_kernel()
    sgrid = build_sgrid(kernel, 1e-3)
    state = build_state(grid, sgrid, kernel, 0, PolyBump().evaluate(grid))
    params = StepParams()
    norm0 = math.sqrt(2.0 * energy(state))
    for _ in range(1000):
        step(state, params)
    assert abs(math.sqrt(2.0 * energy(state)) - norm0) <= 1e-10 * norm0
    assert state.t == pytest.approx(1.0)
    assert state.step_index == 1000


@pytest.mark.parametrize("j", [0, 1, 2])
def test_energy_non_increasing(j, grid_1d, exp_kernel, exp_sgrid, bump):
    state = build_state(grid_1d, exp_sgrid, exp_kernel, j, bump)
    params = StepParams()
    previous = energy(state)
    band = 1e-8 * previous
    for _ in range(100):
        step(state, params)
        current = energy(state)
        assert current <= previous + band
        previous = current
    assert previous < energy(build_state(grid_1d, exp_sgrid, exp_kernel, j, bump))


@pytest.mark.parametrize("j", [0, 1, 2])
def test_energy_non_increasing_with_history(j, grid_1d, exp_kernel, exp_sgrid, bump):
    state = build_state(grid_1d, exp_sgrid, exp_kernel, j, bump, ExpDecayHistory(bump, 1.0))
    params = StepParams()
    previous = energy(state)
    band = 1e-8 * previous
    for _ in range(150):
        step(state, params)
        current = energy(state)
        assert current <= previous + band
        previous = current


def test_energy_identity_second_order():
    residuals = [identity_residual(dt) for dt in (2e-3, 1e-3, 5e-4)]
    assert richardson_order(residuals) >= 1.8


def _final_field(dt, T=0.1):
    grid = build_grid((2.0,), (32,))
    kernel = make_exponential_kernel(1.0, 1.0)
    sgrid = build_sgrid(kernel, dt, ratio=1.0, tail_tol=1e-6)
    y0 = lowest_mode(grid, grid.biharmonic - grid.laplacian)
    state = build_state(grid, sgrid, kernel, 0, y0, ConstantHistory(y0))
    params = StepParams()
    for _ in range(steps_for(T, dt)):
        step(state, params)
    return state.y


def test_strang_cn_global_second_order():
    fields = [_final_field(dt) for dt in (2e-3, 1e-3, 5e-4)]
    coarse = np.linalg.norm(fields[0] - fields[1])
    fine = np.linalg.norm(fields[1] - fields[2])
    assert math.log2(coarse / fine) >= 1.8


def _final_energy(scheme, dt, T=0.5):
    grid = build_grid((4.0,), (8,))
    kernel = make_exponential_kernel(1.0, 1.0)
    sgrid = build_sgrid(kernel, dt, ratio=1.0, tail_tol=1e-6)
    y0 = lowest_mode(grid, grid.biharmonic - grid.laplacian)
    state = build_state(grid, sgrid, kernel, 0, y0, ConstantHistory(y0))
    params = StepParams(scheme=scheme)
    for _ in range(steps_for(T, dt)):
        step(state, params)
    return energy(state)


def test_implicit_euler_energy_gap_is_first_order():
    gaps = [abs(_final_energy(Scheme.IMPLICIT_EULER, dt) - _final_energy(Scheme.STRANG_CN, dt))
            for dt in (0.02, 0.01, 0.005)]
    assert gaps[0] > 0
    assert gaps[1] <= 0.7 * gaps[0]
    assert gaps[2] <= 0.7 * gaps[1]
    assert gaps[2] >= 0.3 * gaps[1]


def test_implicit_euler_dissipates(grid_1d, exp_kernel, exp_sgrid, bump):
    state = build_state(grid_1d, exp_sgrid, exp_kernel, 1, bump)
    params = StepParams(scheme=Scheme.IMPLICIT_EULER)
    previous = energy(state)
    for _ in range(20):
        step(state, params)
        assert energy(state) <= previous * (1.0 + 1e-10)
        previous = energy(state)
    assert state.t == pytest.approx(0.02)


def test_build_state_rejects_bad_order(grid_1d, exp_kernel, exp_sgrid, bump):
    with pytest.raises(ConfigurationError):
        build_state(grid_1d, exp_sgrid, exp_kernel, 3, bump)


def test_state_copy_is_independent(grid_1d, exp_kernel, exp_sgrid, bump):
    state = build_state(grid_1d, exp_sgrid, exp_kernel, 0, bump)
    clone = state.copy()
    step(clone, StepParams())
    assert clone.t > state.t
    assert np.array_equal(state.y, bump)


# =============================================================================
# РЕЗОЛЬВЕНТА
# =============================================================================

@pytest.mark.parametrize("j", [0, 1, 2])
def test_resolvent_round_trip(j, grid_1d, exp_kernel, exp_sgrid, bump):
    dt = 1e-3
    state = build_state(grid_1d, exp_sgrid, exp_kernel, j, bump, ExpDecayHistory(bump, 1.0))
    ay, aeta = apply_generator(state)
    solved = resolvent_solve(state, (state.y - dt * ay, state.eta.values - dt * aeta), dt)
    err = math.hypot(np.linalg.norm(solved.y - state.y), np.linalg.norm(solved.eta.values - state.eta.values))
    scale = math.hypot(np.linalg.norm(state.y), np.linalg.norm(state.eta.values))
    assert err <= 1e-10 * scale


def test_resolvent_rejects_bad_history_shape(grid_1d, exp_kernel, exp_sgrid, bump):
    state = build_state(grid_1d, exp_sgrid, exp_kernel, 0, bump)
    with pytest.raises(ConfigurationError):
        resolvent_solve(state, (bump, np.zeros((3, grid_1d.size))), 1e-3)


# =============================================================================
# БЭКЕНДЫ ПАМЯТИ И РЕШАТЕЛИ
# =============================================================================

def test_backend_equivalence_over_steps():
    grid = build_grid((1.0,), (16,))
    kernel = make_prony_kernel([(1.0, 1.0), (0.5, 3.0)])
    sgrid = build_sgrid(kernel, 5e-4, ratio=1.0)
    y0 = RandomBump(seed=7).evaluate(grid)
    state = build_state(grid, sgrid, kernel, 0, y0, ExpDecayHistory(y0, 1.0), with_ring=True)
    params = StepParams()
    assert backend_difference(state) <= 1e-6
    for _ in range(100):
        step(state, params)
        assert backend_difference(state) <= 1e-6


def test_iterative_solver_matches_direct(monkeypatch, grid_1d, exp_kernel, exp_sgrid, bump):
    params = StepParams(tol=1e-10, maxiter=5000)
    direct = build_state(grid_1d, exp_sgrid, exp_kernel, 0, bump)
    for _ in range(5):
        step(direct, params)

    monkeypatch.setattr(settings, "DIRECT_SOLVER_MAX_SIZE", 1)
    iterative = build_state(grid_1d, exp_sgrid, exp_kernel, 0, bump)
    for _ in range(5):
        step(iterative, params)
    assert np.allclose(iterative.y, direct.y, rtol=1e-6, atol=1e-8)


def test_steps_for():
    assert steps_for(1.0, 0.1) == 10
    assert steps_for(0.0, 0.1) == 0


# =============================================================================
# ПРОГОН
# =============================================================================

BASE_CONFIG = """
lengths = 1
counts = 16
kernel = exponential
dt = 0.001
"""


def test_run_records_at_stride():
    config = parse_text(BASE_CONFIG + "T = 0.05\nrecord_stride = 10\n")
    trajectory = run(config)
    assert trajectory.ok
    assert trajectory.steps == 50
    assert trajectory.times() == pytest.approx([0.0, 0.01, 0.02, 0.03, 0.04, 0.05])
    assert trajectory.energies()[-1] <= trajectory.energies()[0]
    assert all(r.dissipation <= 0 for r in trajectory.records)


def test_run_with_zero_horizon():
    trajectory = run(parse_text(BASE_CONFIG + "T = 0\n"))
    assert len(trajectory.records) == 1
    assert trajectory.records[0].t == 0.0


def test_run_2d():
    config = parse_text("""
dimension = 2
lengths = 1, 1
counts = 8, 8
kernel = exponential
j = 1
T = 0.01
""")
    trajectory = run(config)
    assert trajectory.ok
    assert trajectory.energies()[-1] <= trajectory.energies()[0] * (1.0 + 1e-8)


def test_run_with_snapshots_fills_higher_energies():
    config = parse_text(BASE_CONFIG + "T = 0.05\nrecord_stride = 10\nsnapshot_stride = 10\n")
    trajectory = run(config)
    assert trajectory.records[0].e1 is not None
    assert trajectory.records[1].e1 is not None
    assert trajectory.records[1].e2 is not None


def test_run_higher_energies_non_increasing():
    config = parse_text(BASE_CONFIG + "T = 0.2\nrecord_stride = 10\nsnapshot_stride = 10\nhistory = exp_decay\n")
    trajectory = run(config)
    assert trajectory.ok
    for name in ("e1", "e2"):
        series = [getattr(r, name) for r in trajectory.records]
        assert all(value is not None for value in series)
        band = 1e-6 * series[0]
        assert all(b <= a + band for a, b in zip(series, series[1:]))


def test_run_reports_backend_difference():
    trajectory = run(parse_text(BASE_CONFIG + "T = 0.01\ncheck_backends = true\nhistory = constant\ns_ratio = 1\ntail_tol = 1e-6\n"))
    assert trajectory.backend_max_diff is not None
    assert trajectory.backend_max_diff < 1e-4


def test_run_keeps_partial_trajectory_on_error(monkeypatch):
    original = evolution.step
    calls = {"count": 0}

    def failing_step(state, params):
        calls["count"] += 1
        if calls["count"] > 25:
            raise NumericError("Решение расходится", residual=1.0)
        return original(state, params)

    monkeypatch.setattr(evolution, "step", failing_step)
    trajectory = run(parse_text(BASE_CONFIG + "T = 0.1\nrecord_stride = 5\n"))
    assert not trajectory.ok
    assert trajectory.error_exit_code == 3
    assert 0 < len(trajectory.records) < 21


@pytest.mark.parametrize("scheme", [Scheme.STRANG_CN, Scheme.IMPLICIT_EULER])
def test_zero_data_stays_zero(scheme, grid_1d, exp_kernel, exp_sgrid):
    state = build_state(grid_1d, exp_sgrid, exp_kernel, 2, np.zeros(grid_1d.size))
    params = StepParams(scheme=scheme)
    for _ in range(10):
        step(state, params)
    assert not np.any(state.y)
    assert not np.any(state.eta.values)
    assert energy(state) == 0.0
