# test_energy_meter.py
import numpy as np
import pytest

from core.energy_meter import (
    MonitorBaseline, default_eps0, dissipation_rhs, energy, higher_energy, history_ratio, lemma_monitors,
    memory_energy,
)
from core.errors import StateError
from core.evolution import build_state, step
from core.kernel_toolkit import make_linear_profile
from core.memory_engine import zero_history
from core.spatial_discretization import norm_hj
from models.simulation import StateSnapshot, StepParams
from profiles import ConstantHistory


def test_energy_of_fresh_state(grid_1d, exp_kernel, exp_sgrid, bump):
    state = build_state(grid_1d, exp_sgrid, exp_kernel, 0, bump)
    assert energy(state) == pytest.approx(0.5 * norm_hj(grid_1d, bump, 0) ** 2)
    assert memory_energy(state) == 0.0
    assert dissipation_rhs(state) == 0.0


def test_energy_with_constant_history(grid_1d, exp_kernel, exp_sgrid, bump):
    # η⁰(s) = s φ: Σ w g s² ≈ ∫ s² e^{-s} ds = 2, Σ w g' s² ≈ -2
    state = build_state(grid_1d, exp_sgrid, exp_kernel, 0, bump, ConstantHistory(bump))
    assert memory_energy(state) == pytest.approx(2.0, rel=1e-2)
    assert dissipation_rhs(state) == pytest.approx(-1.0, rel=1e-2)
    assert energy(state) == pytest.approx(0.5 * (1.0 + memory_energy(state)))


def test_energy_order_override(grid_1d, exp_kernel, exp_sgrid, bump):
    state = build_state(grid_1d, exp_sgrid, exp_kernel, 0, bump, ConstantHistory(bump))
    assert energy(state, j=1) > energy(state, j=0)


def test_dissipation_is_nonpositive(grid_1d, exp_kernel, exp_sgrid, bump):
    state = build_state(grid_1d, exp_sgrid, exp_kernel, 2, bump)
    for _ in range(20):
        step(state, StepParams())
        assert dissipation_rhs(state) <= 0.0


def _snapshots(state, count):
    shots = [StateSnapshot.of(state)]
    for _ in range(count - 1):
        step(state, StepParams())
        shots.append(StateSnapshot.of(state))
    return shots


def test_higher_energy_windows(grid_1d, exp_kernel, exp_sgrid, bump):
    state = build_state(grid_1d, exp_sgrid, exp_kernel, 0, bump)
    shots = _snapshots(state, 4)
    assert len(higher_energy(shots, 0, 1, grid_1d, exp_sgrid)) == 2
    assert len(higher_energy(shots[:2], 0, 1, grid_1d, exp_sgrid)) == 1
    assert len(higher_energy(shots[:3], 0, 2, grid_1d, exp_sgrid)) == 1
    assert all(v >= 0 for v in higher_energy(shots, 0, 2, grid_1d, exp_sgrid))


def test_higher_energy_errors(grid_1d, exp_kernel, exp_sgrid, bump):
    state = build_state(grid_1d, exp_sgrid, exp_kernel, 0, bump)
    shots = _snapshots(state, 2)
    with pytest.raises(StateError):
        higher_energy(shots, 0, 2, grid_1d, exp_sgrid)
    with pytest.raises(StateError):
        higher_energy(shots, 0, 3, grid_1d, exp_sgrid)
    with pytest.raises(StateError):
        higher_energy(list(reversed(shots)), 0, 1, grid_1d, exp_sgrid)


def test_history_ratio_bounds_linear_history(grid_1d, exp_sgrid, bump):
    values = exp_sgrid.nodes[:, None] * bump[None, :]
    # ‖s φ‖² = s², уровень 1 даёт отношение ровно 1 при s ≤ t
    ratio = history_ratio(grid_1d, exp_sgrid, 0, exp_sgrid.s_max + 1.0, values, None, 1.0)
    assert ratio == pytest.approx(1.0)
    assert history_ratio(grid_1d, exp_sgrid, 0, 0.0, values, None, 0.0) is None


def test_lemma_monitors(grid_1d, exp_kernel, exp_sgrid, bump):
    state = build_state(grid_1d, exp_sgrid, exp_kernel, 0, bump)
    e0 = energy(state)
    baseline = MonitorBaseline(energy0=e0, energy1_0=1.0, energy2_0=1.0,
                               eta0=zero_history(grid_1d, exp_sgrid), eps0=default_eps0(e0))
    for _ in range(10):
        step(state, StepParams())
    record = lemma_monitors(state, baseline, make_linear_profile(1.0))
    assert record.t == pytest.approx(0.01)
    assert record.bound is not None and record.bound > 0
    assert baseline.c_bound == pytest.approx(record.bound)
    assert record.h2 is None
    assert record.convex is not None
    assert record.m_bound_0 is not None


def test_default_eps0():
    assert default_eps0(2.0) == pytest.approx(0.25)
    assert default_eps0(0.0) is None


def test_baseline_total(grid_1d, exp_sgrid):
    baseline = MonitorBaseline(energy0=1.0, energy1_0=2.0, energy2_0=3.0, eta0=zero_history(grid_1d, exp_sgrid))
    assert baseline.total == 6.0
    assert np.all(baseline.eta0.values == 0)
