# test_memory_engine.py
import numpy as np
import pytest

from core.errors import ConfigurationError, ShapeError, StateError
from core.kernel_toolkit import make_exponential_kernel, make_polynomial_kernel, make_prony_kernel
from core.memory_engine import (
    HistoryField, YRingBuffer, advance_history, build_sgrid, init_history, memory_force,
    memory_force_direct, shift_history, zero_history,
)
from core.spatial_discretization import build_grid, grid_points, norm_hj
from profiles import ConstantHistory, ExpDecayHistory


# =============================================================================
# S-СЕТКА
# =============================================================================

def test_sgrid_uniform_section(exp_sgrid):
    gaps = np.diff(exp_sgrid.nodes)
    uniform = exp_sgrid.uniform_count
    assert exp_sgrid.nodes[0] == 0.0
    assert np.allclose(gaps[:uniform - 1], 1e-3)
    assert np.all(gaps[uniform - 1:] >= 1e-3 - 1e-15)
    assert exp_sgrid.weights.sum() == pytest.approx(exp_sgrid.s_max)


@pytest.mark.parametrize("kernel", [
    make_exponential_kernel(1.0, 1.0),
    make_polynomial_kernel(1.0, 4.0),
    make_prony_kernel([(1.0, 1.0), (0.5, 3.0)]),
])
def test_sgrid_weight_per_gap_non_increasing(kernel):
    # вес g на единицу шага не растёт вдоль s
    sgrid = build_sgrid(kernel, 1e-3)
    gaps = np.diff(sgrid.nodes)
    density = sgrid.g_weights[1:] / gaps
    assert np.all(np.diff(density) <= 1e-9 * density[:-1])
    assert sgrid.g_weights[1] <= 1e-3 * sgrid.g_values[0]


def test_sgrid_tail_cutoff(exp_kernel, exp_sgrid):
    assert exp_kernel.eval_g(exp_sgrid.s_max) < 1e-10
    assert exp_sgrid.truncated_mass == pytest.approx(float(exp_kernel.eval_f(exp_sgrid.s_max)))


def test_sgrid_fully_uniform(exp_kernel):
    sgrid = build_sgrid(exp_kernel, 0.01, ratio=1.0, tail_tol=1e-6)
    assert sgrid.uniform_count == sgrid.size
    assert np.allclose(np.diff(sgrid.nodes), 0.01)
    assert sgrid.s_max == pytest.approx(16.0)


def test_sgrid_null_kernel(null_kernel):
    sgrid = build_sgrid(null_kernel, 1e-3)
    assert np.allclose(sgrid.nodes, [0.0, 1e-3])
    assert np.all(sgrid.g_weights == 0)


def test_sgrid_rejects_bad_parameters(exp_kernel):
    with pytest.raises(ConfigurationError):
        build_sgrid(exp_kernel, 0.0)
    with pytest.raises(ConfigurationError):
        build_sgrid(exp_kernel, 1e-3, ratio=0.9)


# =============================================================================
# ИСТОРИЯ
# =============================================================================

def test_zero_history(grid_1d, exp_sgrid):
    history = init_history(None, grid_1d, exp_sgrid)
    assert history.values.shape == (exp_sgrid.size, grid_1d.size)
    assert not np.any(history.values)


def test_constant_history_is_linear_in_s(grid_1d, exp_sgrid, bump):
    history = init_history(ConstantHistory(bump), grid_1d, exp_sgrid)
    expected = exp_sgrid.nodes[:, None] * bump[None, :]
    assert np.allclose(history.values, expected, rtol=1e-12, atol=1e-14)


def test_exp_history_integral(grid_1d, exp_sgrid, bump):
    history = init_history(ExpDecayHistory(bump, 1.0), grid_1d, exp_sgrid)
    expected = (1.0 - np.exp(-exp_sgrid.nodes))[:, None] * bump[None, :]
    assert np.max(np.abs(history.values - expected)) < 1e-6


def test_shift_and_advance_preserve_linear_history(grid_1d, exp_sgrid, bump):
    history = init_history(ConstantHistory(bump), grid_1d, exp_sgrid)
    shifted = shift_history(history)
    expected = np.maximum(exp_sgrid.nodes - 1e-3, 0.0)[:, None] * bump[None, :]
    assert np.allclose(shifted[1:], expected[1:], atol=1e-13)
    assert not np.any(shifted[0])

    advanced = advance_history(history, 1e-3 * bump, 1e-3)
    assert np.allclose(advanced.values, history.values, atol=1e-13)


def test_advance_history_rejects_other_dt(grid_1d, exp_sgrid, bump):
    with pytest.raises(ConfigurationError):
        advance_history(zero_history(grid_1d, exp_sgrid), bump, 2e-3)


def test_interpolation(grid_1d, exp_sgrid, bump):
    history = init_history(ConstantHistory(bump), grid_1d, exp_sgrid)
    assert np.allclose(history.interpolate(0.5), 0.5 * bump)
    assert not np.any(history.interpolate(0.0))
    many = history.interpolate_many(np.array([-1.0, 0.25, 2.0]))
    assert np.allclose(many[1], 0.25 * bump)
    assert np.allclose(many[2], 2.0 * bump)
    assert not np.any(many[0])


# =============================================================================
# СИЛА ПАМЯТИ
# =============================================================================

def test_memory_force_constant_history(grid_1d, exp_kernel, bump):
    sgrid = build_sgrid(exp_kernel, 0.01, ratio=1.0)
    history = init_history(ConstantHistory(bump), grid_1d, sgrid)
    force = memory_force(history, exp_kernel, 0, grid_1d)
    # -∫ s e^{-s} ds φ = -φ
    assert np.allclose(force, -bump, rtol=1e-4, atol=1e-6)


def test_memory_force_shape_mismatch(grid_1d, exp_kernel, exp_sgrid):
    other = build_grid((1.0,), (16,))
    with pytest.raises(ShapeError):
        memory_force(zero_history(other, exp_sgrid), exp_kernel, 0, grid_1d)


def test_ring_buffer_order(grid_1d):
    buffer = YRingBuffer(grid_1d, 0.1, 0.3)
    assert buffer.capacity == 4
    for k in range(3):
        buffer.push(np.full(grid_1d.size, k, dtype=complex))
    with pytest.raises(StateError):
        buffer.ordered()
    buffer.push(np.full(grid_1d.size, 3, dtype=complex))
    buffer.push(np.full(grid_1d.size, 4, dtype=complex))
    ordered = buffer.ordered()
    assert [row[0].real for row in ordered] == [4, 3, 2, 1]
    assert buffer.slice(1)[0] == 3
    with pytest.raises(StateError):
        YRingBuffer(grid_1d, 0.1, 0.3).slice(0)


def test_ring_buffer_from_history(grid_1d, bump):
    history = ExpDecayHistory(bump, 2.0)
    buffer = YRingBuffer.from_history(history, grid_1d, 0.1, 1.0, bump)
    assert np.allclose(buffer.slice(0), bump)
    assert np.allclose(buffer.slice(3), np.exp(-0.6) * bump)
    assert np.allclose(history(grid_points(grid_1d), np.array([0.3]))[0], np.exp(-0.6) * bump)


@pytest.mark.parametrize("j", [0, 1, 2])
def test_backends_agree_at_start(j, grid_1d, bump):
    kernel = make_prony_kernel([(1.0, 1.0), (0.5, 3.0)])
    sgrid = build_sgrid(kernel, 1e-3, ratio=1.0)
    history_profile = ExpDecayHistory(bump, 1.0)
    history = init_history(history_profile, grid_1d, sgrid)
    buffer = YRingBuffer.from_history(history_profile, grid_1d, sgrid.dt, sgrid.s_max, bump)

    transported = memory_force(history, kernel, j, grid_1d)
    direct = memory_force_direct(buffer, kernel, j, grid_1d)
    scale = norm_hj(grid_1d, transported, 0)
    assert norm_hj(grid_1d, transported - direct, 0) <= 1e-5 * scale


def test_history_field_copy_is_independent(grid_1d, exp_sgrid):
    history = zero_history(grid_1d, exp_sgrid)
    clone = history.copy()
    clone.values[1] = 1.0
    assert not np.any(history.values)
    assert isinstance(clone, HistoryField)


def test_linear_in_time_history(grid_1d, exp_sgrid, bump):
    def ramp(points, taus):
        return np.outer(taus, bump)

    history = init_history(ramp, grid_1d, exp_sgrid)
    expected = (exp_sgrid.nodes ** 2 / 2.0)[:, None] * bump[None, :]
    scale = np.max(np.abs(expected))
    assert np.max(np.abs(history.values - expected)) <= 1e-6 * scale


def test_constant_solution_is_fixed_point(grid_1d, exp_sgrid, bump):
    history = init_history(ConstantHistory(bump), grid_1d, exp_sgrid)
    for _ in range(100):
        history = advance_history(history, 1e-3 * bump, 1e-3)
    expected = exp_sgrid.nodes[:, None] * bump[None, :]
    assert np.allclose(history.values, expected, atol=1e-10)


def test_single_step_from_zero_history(grid_1d, exp_sgrid, bump):
    history = advance_history(zero_history(grid_1d, exp_sgrid), bump, 1e-3)
    assert not np.any(history.values[0])
    assert np.allclose(history.values[1:], bump[None, :])


def test_memory_force_biharmonic_factorizes(grid_1d, exp_kernel, bump):
    sgrid = build_sgrid(exp_kernel, 0.01, ratio=1.0)
    history = init_history(ConstantHistory(bump), grid_1d, sgrid)
    first_moment = float(sgrid.g_weights @ sgrid.nodes)
    force = memory_force(history, exp_kernel, 2, grid_1d)
    assert np.allclose(force, -first_moment * (grid_1d.biharmonic @ bump), rtol=1e-10)


def test_direct_force_constant_slices(grid_1d, exp_kernel, bump):
    sgrid = build_sgrid(exp_kernel, 0.01, ratio=1.0)
    buffer = YRingBuffer.from_history(ConstantHistory(bump), grid_1d, 0.01, sgrid.s_max, bump)
    force = memory_force_direct(buffer, exp_kernel, 0, grid_1d)
    assert np.allclose(force, -bump, rtol=1e-4, atol=1e-6)
    empty = YRingBuffer.from_history(None, grid_1d, 0.01, sgrid.s_max, np.zeros_like(bump))
    assert not np.any(memory_force_direct(empty, exp_kernel, 0, grid_1d))
