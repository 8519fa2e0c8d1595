# test_decay_analysis.py
import numpy as np
import pytest

from core.decay_analysis import (
    analyze_decay, check_envelope, envelope_beta, envelope_rate, fit_decay, fit_envelope,
)
from core.errors import DataError, WindowError
from core.kernel_toolkit import build_Gn, eval_pn, make_linear_profile, make_power_profile
from models.simulation import EnergyRecord
from services.verification.verify_suites import (
    check_exponential_decay, check_higher_energies, check_polynomial_envelope,
)


def _records(func, times=None):
    times = np.arange(0.0, 101.0, 1.0) if times is None else times
    return [EnergyRecord(t=float(t), energy=float(func(t)), dissipation=0.0) for t in times]


POWER_LAW = _records(lambda t: 5.0 / max(t, 1.0) ** 2)
INVERSE = _records(lambda t: 1.0 / max(t, 1.0))
CONSTANT = _records(lambda t: 1.0)


# =============================================================================
# НАКЛОН
# =============================================================================

def test_fit_decay_power_law():
    report = fit_decay(POWER_LAW, 10.0, 100.0)
    assert report.rate == pytest.approx(2.0, rel=1e-10)
    assert report.r_squared == pytest.approx(1.0)
    assert report.confident
    assert 10 <= report.n_points <= 50


def test_fit_decay_constant_energy():
    report = fit_decay(CONSTANT, 10.0, 100.0)
    assert report.rate == 0.0


def test_fit_decay_needs_enough_points():
    with pytest.raises(WindowError):
        fit_decay(POWER_LAW, 10.0, 15.0)


def test_fit_decay_rejects_nonpositive_energy():
    records = _records(lambda t: 1.0 - t / 50.0)
    with pytest.raises(DataError):
        fit_decay(records, 10.0, 100.0)


# =============================================================================
# ОГИБАЮЩАЯ
# =============================================================================

def test_envelope_inverse_law_holds():
    gn = build_Gn(make_linear_profile(1.0), 1)
    fit = fit_envelope(INVERSE, gn, (10.0, 100.0))
    assert fit.alpha == pytest.approx(1.0, rel=1e-6)
    assert fit.holds
    assert not fit.capped
    assert not fit.vacuous


def test_envelope_exponential_decay_holds():
    records = _records(lambda t: np.exp(-t))
    alpha, holds = check_envelope(records, build_Gn(make_linear_profile(1.0), 1), (10.0, 100.0))
    assert holds
    assert alpha == pytest.approx(np.sqrt(10.0 * np.exp(-10.0)), rel=1e-6)


def test_constant_energy_envelope_is_vacuous():
    fit = fit_envelope(CONSTANT, build_Gn(make_linear_profile(1.0), 1), (10.0, 100.0))
    assert fit.vacuous
    assert not fit.holds


def test_envelope_cap():
    fit = fit_envelope(INVERSE, build_Gn(make_linear_profile(1.0), 1), (10.0, 100.0), cap=1e-3)
    assert fit.capped
    assert fit.alpha is None
    assert not fit.holds


def test_envelope_empty_window():
    with pytest.raises(WindowError):
        fit_envelope(INVERSE, build_Gn(make_linear_profile(1.0), 1), (200.0, 300.0))


def test_power_profile_envelope():
    records = _records(lambda t: max(t, 1.0) ** -0.5)
    alpha, holds = check_envelope(records, build_Gn(make_power_profile(2.0), 1), (10.0, 100.0))
    assert holds
    assert alpha > 0


# =============================================================================
# КОНСТАНТЫ ОГИБАЮЩЕЙ
# =============================================================================

def test_envelope_beta_and_rate():
    linear = make_linear_profile(1.0)
    power = make_power_profile(2.0)
    assert envelope_beta(3.0, linear, 2) == pytest.approx(27.0)
    assert envelope_beta(None, linear, 2) is None
    assert envelope_beta(2.0, power, 1) == pytest.approx(2.0)
    assert envelope_rate(linear, 3) == 3.0
    assert envelope_rate(power, 2) == pytest.approx(eval_pn(2.0, 2))


def test_analyze_decay_combines_fit_and_envelope():
    profile = make_linear_profile(1.0)
    report = analyze_decay(INVERSE, build_Gn(profile, 1), profile, 10.0, 100.0, eps0=0.5)
    assert report.rate == pytest.approx(1.0, rel=1e-10)
    assert report.holds
    assert report.beta == pytest.approx(report.alpha ** 2)
    assert report.eps0 == 0.5
    assert report.n == 1
    assert report.to_dict()['window'] == [10.0, 100.0]


def test_fit_decay_flags_exponential_curvature():
    report = fit_decay(_records(lambda t: np.exp(-t)), 10.0, 100.0)
    assert report.rate > 10.0
    assert report.r_squared < 0.99


def test_fit_decay_is_scale_equivariant():
    scaled = _records(lambda t: 7.0 * 5.0 / max(t, 1.0) ** 2)
    assert fit_decay(scaled, 10.0, 100.0).rate == pytest.approx(fit_decay(POWER_LAW, 10.0, 100.0).rate)


def test_power_profile_second_order_envelope():
    records = _records(lambda t: max(t, 1.0) ** -0.75)
    gn = build_Gn(make_power_profile(2.0), 2)
    alpha, holds = check_envelope(records, gn, (10.0, 100.0))
    assert holds
    assert np.isfinite(alpha)
    for t in (10.0, 50.0, 100.0):
        assert t ** -0.75 <= 2.0 * alpha * gn(2.0 * alpha / t) * (1.0 + 1e-9)


# =============================================================================
# ПРОГОНЫ С ПАМЯТЬЮ
# =============================================================================

def test_exponential_kernel_run_decay_rate():
    result = check_exponential_decay()
    assert result.passed, result.detail


def test_polynomial_kernel_run_envelope_holds():
    result = check_polynomial_envelope()
    assert result.passed, result.detail


def test_higher_energies_non_increasing_over_run():
    result = check_higher_energies()
    assert result.passed, result.detail
