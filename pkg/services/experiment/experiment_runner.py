#!/usr/bin/env python3
"""
Оркестрация одного эксперимента:
прогон -> проверки -> анализ затухания -> energies.csv + report.txt.
"""

import logging
import os
from typing import List, Optional, Tuple

import numpy as np

from config import constants
from config.experiment_config import ExperimentConfig
from config.settings import settings
from core.decay_analysis import analyze_decay, envelope_rate
from core.energy_meter import default_eps0
from core.errors import DataError, ParameterDomainError, WindowError
from core.evolution import run
from core.kernel_toolkit import Kernel, build_Gn, validate_assumptions
from core.memory_engine import build_sgrid
from models.simulation import AssumptionReport, CheckResult, DecayReport, Trajectory
from services.storage.result_writer import ResultWriter, format_number

logger = logging.getLogger(__name__)


# =============================================================================
# ПРОВЕРКИ ТРАЕКТОРИИ
# =============================================================================

def _non_increasing(values: List[float], band: float) -> Tuple[bool, float]:
    """Истина, если каждый следующий элемент не больше предыдущего + band."""
    worst = 0.0
    for previous, current in zip(values, values[1:]):
        worst = max(worst, current - previous)
    return worst <= band, worst


def energy_checks(trajectory: Trajectory, kernel: Kernel) -> List[CheckResult]:
    records = trajectory.records
    if not records:
        return []
    energies = [r.energy for r in records]
    checks = [
        CheckResult("energy_nonnegative", all(e >= 0 for e in energies)),
        CheckResult("dissipation_nonpositive", all(r.dissipation <= 0 for r in records)),
    ]

    if kernel.is_memoryless:
        norms = np.sqrt(2.0 * np.array(energies))
        drift = float(np.max(np.abs(norms - norms[0])) / max(norms[0], 1e-300))
        checks.append(CheckResult("conservation", drift <= constants.CONSERVATION_RTOL,
                                  f"max relative drift {drift:.3e}"))
    else:
        passed, worst = _non_increasing(energies, constants.MONOTONE_RTOL * energies[0])
        checks.append(CheckResult("monotonicity", passed, f"max increase {worst:.3e}"))

    for name in ("e1", "e2"):
        series = [getattr(r, name) for r in records if getattr(r, name) is not None]
        if len(series) >= 2:
            passed, worst = _non_increasing(series, constants.HIGHER_ENERGY_BAND * series[0])
            checks.append(CheckResult(f"higher_energy_{name[1]}", passed, f"max increase {worst:.3e}"))
    return checks


# =============================================================================
# АНАЛИЗ ЗАТУХАНИЯ
# =============================================================================

def decay_section(config: ExperimentConfig, trajectory: Trajectory,
                  kernel: Kernel) -> Tuple[Optional[DecayReport], str]:
    if kernel.is_memoryless:
        return None, "система без памяти: анализ затухания не выполняется"
    if not trajectory.ok:
        return None, "прогон прерван: анализ затухания пропущен"
    if config.T <= 0:
        return None, "T = 0: нет окна для подгонки"

    profile = config.make_profile()
    eps0 = config.eps0 if config.eps0 is not None else default_eps0(trajectory.records[0].energy)
    try:
        report = analyze_decay(trajectory.records, build_Gn(profile, config.n), profile,
                               config.fit_t0, config.fit_t1, eps0)
    except (DataError, ParameterDomainError, WindowError) as error:
        logger.warning(f"⚠️ Анализ затухания: {error}")
        return None, str(error)
    return report, "ok"


# =============================================================================
# ОТЧЁТ
# =============================================================================

def _yes_no(flag: Optional[bool]) -> str:
    if flag is None:
        return "n/a"
    return "yes" if flag else "no"


def build_report(config: ExperimentConfig, trajectory: Trajectory, assumptions: AssumptionReport,
                 decay: Optional[DecayReport], decay_note: str, checks: List[CheckResult]) -> List[str]:
    lines = ["# BiMemLab report", "", "[config]"]
    lines += [f"{key} = {value}" for key, value in config.effective_items()]

    lines += ["", "[run]"]
    lines.append(f"steps_done = {trajectory.steps}")
    lines.append(f"records = {len(trajectory.records)}")
    lines.append(f"status = {'ok' if trajectory.ok else 'error: ' + trajectory.error}")
    if trajectory.backend_max_diff is not None:
        lines.append(f"backend_max_difference = {format_number(trajectory.backend_max_diff)}")

    lines += ["", "[checks]"]
    lines += [str(check) for check in checks] or ["нет записей"]

    lines += ["", "[assumptions]"]
    for key, value in assumptions.to_dict().items():
        rendered = _yes_no(value) if isinstance(value, bool) or value is None else format_number(value)
        lines.append(f"{key} = {rendered}")

    lines += ["", "[decay]"]
    if decay is None:
        lines.append(f"note = {decay_note}")
    else:
        profile = config.make_profile()
        lines.append(f"window = [{format_number(decay.t0)}, {format_number(decay.t1)}]")
        lines.append(f"fitted_rate = {format_number(decay.rate)}")
        lines.append(f"r_squared = {format_number(decay.r_squared)}")
        lines.append(f"rate_confident = {_yes_no(decay.confident)}")
        lines.append(f"fit_points = {decay.n_points}")
        lines.append(f"envelope_order = {decay.n}")
        lines.append(f"envelope_rate = {format_number(envelope_rate(profile, decay.n))}")
        lines.append(f"eps0_used = {format_number(decay.eps0)}")
        lines.append(f"alpha = {format_number(decay.alpha)}")
        lines.append(f"beta = {format_number(decay.beta)}")
        lines.append(f"envelope_capped = {_yes_no(decay.capped)}")
        lines.append(f"envelope_vacuous = {_yes_no(decay.vacuous)}")
        lines.append(f"envelope_holds = {'PASS' if decay.holds else 'FAIL'}")

    lines += ["", "[monitors]"]
    if trajectory.monitor_maxima:
        for name, value in trajectory.monitor_maxima.items():
            lines.append(f"{name}_max = {format_number(value)}")
    else:
        lines.append("нет активных мониторов")
    return lines


# =============================================================================
# ТОЧКА ВХОДА
# =============================================================================

def run_experiment(config: ExperimentConfig, output_root: Optional[str] = None) -> int:
    """
    Код возврата: 0 - успех, 1 - провалена проверка в отчёте,
    3 - численная ошибка (частичный CSV с пометкой # error).
    """
    root = output_root if output_root is not None else settings.OUTPUT_ROOT
    directory = os.path.join(root, config.output_dir)
    logger.info(f"🚀 Эксперимент {config.source or '<config>'} -> {directory}")

    kernel = config.make_kernel()
    profile = config.make_profile()
    sgrid = build_sgrid(kernel, config.dt, config.s_uniform, config.s_ratio, config.tail_tol)
    assumptions = validate_assumptions(kernel, profile, sgrid, config.tail_tol)

    trajectory = run(config)
    checks = energy_checks(trajectory, kernel)
    decay, decay_note = decay_section(config, trajectory, kernel)

    with ResultWriter(directory, config.csv_name, config.report_name) as writer:
        writer.write_records(trajectory.records)
        if trajectory.error:
            writer.write_error(trajectory.error)
        writer.write_report(build_report(config, trajectory, assumptions, decay, decay_note, checks))

    if not trajectory.ok:
        logger.error(f"❌ Эксперимент завершился с ошибкой: {trajectory.error}")
        return trajectory.error_exit_code
    failed = [check.name for check in checks if not check.passed]
    if failed:
        logger.warning(f"⚠️ Не пройдены проверки: {', '.join(failed)}")
        return 1
    logger.info("✅ Эксперимент завершён")
    return 0
