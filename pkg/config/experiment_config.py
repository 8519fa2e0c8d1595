# config/experiment_config.py
"""
Файл эксперимента: плоские строки `key = value`, комментарии после `#`.

Неизвестные ключи отклоняются, значения по умолчанию подставляются
и попадают в эхо отчёта (каждый ключ ровно один раз).
"""

import logging
import os
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Dict, List, Optional, Tuple

from config import constants
from core.errors import ConfigParseError, ValidationError
from core.kernel_toolkit import (
    ConvexityProfile, Kernel, make_exponential_kernel, make_linear_profile, make_null_kernel,
    make_polynomial_kernel, make_power_profile, make_prony_kernel, minimal_power_exponent,
)
from core.spatial_discretization import Grid, build_grid
from models.simulation import KernelFamily, Scheme, StepParams
from profiles import HISTORY_PROFILES, INITIAL_PROFILES

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("lengths", "counts", "kernel", "T")
PROFILE_CHOICES = ("auto", "linear", "power")


# =============================================================================
# РАЗБОР ЗНАЧЕНИЙ
# =============================================================================

def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


def _ints(text: str) -> Tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _optional_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"не булево значение: {text}")


def _prony(text: str) -> Tuple[Tuple[float, float], ...]:
    """"1:1, 0.5:3" -> ((1.0, 1.0), (0.5, 3.0))"""
    terms = []
    for part in text.split(","):
        if not part.strip():
            continue
        d, q = part.split(":")
        terms.append((float(d), float(q)))
    return tuple(terms)


def _text(text: str) -> str:
    return text.strip()


PARSERS: Dict[str, Callable[[str], Any]] = {
    "dimension": int,
    "lengths": _floats,
    "counts": _ints,
    "j": int,
    "kernel": _text,
    "d1": float,
    "q1": float,
    "d2": float,
    "q2": float,
    "prony_terms": _prony,
    "profile": _text,
    "p": _optional_float,
    "alpha0": _optional_float,
    "initial": _text,
    "amplitude": float,
    "center": _optional_float,
    "width": float,
    "history": _text,
    "history_rate": float,
    "dt": float,
    "T": float,
    "record_stride": int,
    "snapshot_stride": int,
    "keep_snapshots": _bool,
    "scheme": _text,
    "s_uniform": float,
    "s_ratio": float,
    "tail_tol": float,
    "fit_t0": _optional_float,
    "fit_t1": _optional_float,
    "n": int,
    "eps0": _optional_float,
    "output_dir": _text,
    "csv_name": _text,
    "report_name": _text,
    "seed": int,
    "solver_tol": float,
    "solver_maxiter": int,
    "check_backends": _bool,
}


# =============================================================================
# КОНФИГУРАЦИЯ ЭКСПЕРИМЕНТА
# =============================================================================

@dataclass
class ExperimentConfig:
    lengths: Tuple[float, ...]
    counts: Tuple[int, ...]
    kernel: str
    T: float
    dimension: int = 1
    j: int = 0
    d1: float = 1.0
    q1: float = 1.0
    d2: float = 1.0
    q2: float = 4.0
    prony_terms: Tuple[Tuple[float, float], ...] = ((1.0, 1.0),)
    profile: str = "auto"
    p: Optional[float] = None
    alpha0: Optional[float] = None
    initial: str = "poly_bump"
    amplitude: float = 1.0
    center: Optional[float] = None
    width: float = 0.1
    history: str = "zero"
    history_rate: float = 1.0
    dt: float = constants.DEFAULT_DT
    record_stride: int = constants.DEFAULT_RECORD_STRIDE
    snapshot_stride: int = 0
    keep_snapshots: bool = False
    scheme: str = "strang_cn"
    s_uniform: float = constants.DEFAULT_S_UNIFORM
    s_ratio: float = constants.DEFAULT_S_RATIO
    tail_tol: float = constants.DEFAULT_TAIL_TOL
    fit_t0: Optional[float] = None
    fit_t1: Optional[float] = None
    n: int = 1
    eps0: Optional[float] = None
    output_dir: str = "run"
    csv_name: str = "energies.csv"
    report_name: str = "report.txt"
    seed: int = 0
    solver_tol: float = constants.DEFAULT_SOLVER_TOL
    solver_maxiter: int = constants.DEFAULT_SOLVER_MAXITER
    check_backends: bool = False
    source: Optional[str] = field(default=None, compare=False)

    # -------------------------------------------------------------------------
    # СБОРКА ОБЪЕКТОВ
    # -------------------------------------------------------------------------

    def make_kernel(self) -> Kernel:
        family = KernelFamily(self.kernel)
        if family is KernelFamily.EXPONENTIAL:
            return make_exponential_kernel(self.d1, self.q1)
        if family is KernelFamily.POLYNOMIAL:
            return make_polynomial_kernel(self.d2, self.q2)
        if family is KernelFamily.PRONY:
            return make_prony_kernel(self.prony_terms)
        if family is KernelFamily.NONE:
            return make_null_kernel()
        raise ValidationError(f"Семейство {self.kernel} нельзя задать из файла", key="kernel")

    def make_profile(self) -> ConvexityProfile:
        if self.profile == "linear":
            return make_linear_profile(self.alpha0, self.p)
        return make_power_profile(self.p)

    def make_grid(self) -> Grid:
        return build_grid(self.lengths, self.counts)

    def make_initial_field(self, grid: Grid):
        profile_cls = INITIAL_PROFILES[self.initial]
        return profile_cls(center=self.center, width=self.width, seed=self.seed).evaluate(grid, self.amplitude)

    def make_history_profile(self, y0):
        return HISTORY_PROFILES[self.history](y0, rate=self.history_rate)

    def step_params(self) -> StepParams:
        return StepParams(scheme=Scheme(self.scheme), tol=self.solver_tol, maxiter=self.solver_maxiter)

    # -------------------------------------------------------------------------
    # ЭХО
    # -------------------------------------------------------------------------

    def effective_items(self) -> List[Tuple[str, str]]:
        """Все действующие параметры в порядке объявления."""
        items = []
        for f in fields(self):
            if f.name == "source":
                continue
            items.append((f.name, format_value(getattr(self, f.name))))
        return items


def format_value(value: Any) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ", ".join(f"{format_value(d)}:{format_value(q)}" for d, q in value)
        return ", ".join(format_value(v) for v in value)
    return str(value)


# =============================================================================
# ЧТЕНИЕ ФАЙЛА
# =============================================================================

def parse_text(text: str, source: Optional[str] = None) -> ExperimentConfig:
    values: Dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"Строка {number}: ожидается `key = value`: {raw.strip()}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in PARSERS:
            raise ConfigParseError(f"Неизвестный ключ '{key}' (строка {number})", key=key)
        if key in values:
            raise ConfigParseError(f"Ключ '{key}' задан повторно (строка {number})", key=key)
        try:
            values[key] = PARSERS[key](value)
        except ValueError as error:
            raise ConfigParseError(f"Не удалось прочитать '{key}' = '{value}': {error}", key=key)

    missing = [key for key in REQUIRED_KEYS if key not in values]
    if missing:
        raise ConfigParseError(f"Не заданы обязательные ключи: {', '.join(missing)}", key=missing[0])

    config = ExperimentConfig(source=source, **values)
    resolve_defaults(config)
    validate(config)
    return config


def parse_config(path: str) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigParseError(f"Файл эксперимента не найден: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        config = parse_text(handle.read(), source=path)
    logger.info(f"✅ Прочитан эксперимент {path}")
    return config


# =============================================================================
# ЗНАЧЕНИЯ ПО УМОЛЧАНИЮ И ПРОВЕРКИ
# =============================================================================

def resolve_defaults(config: ExperimentConfig):
    """Разрешает auto-значения, зависящие от ядра и горизонта."""
    if config.kernel not in [family.value for family in KernelFamily if family is not KernelFamily.CUSTOM]:
        raise ValidationError(f"kernel = {config.kernel}: ожидается exponential|polynomial|prony|none", key="kernel")
    if config.profile not in PROFILE_CHOICES:
        raise ValidationError(f"profile = {config.profile}: ожидается {'|'.join(PROFILE_CHOICES)}", key="profile")

    kernel = config.make_kernel()

    if config.profile == "auto":
        config.profile = "power" if kernel.family is KernelFamily.POLYNOMIAL else "linear"
    if config.profile == "linear" and config.alpha0 is None:
        config.alpha0 = kernel.alpha0 if kernel.alpha0 is not None else 1.0
    if config.p is None:
        if config.profile == "power" and kernel.family is KernelFamily.POLYNOMIAL:
            config.p = minimal_power_exponent(config.q2) + 1.0
        else:
            config.p = 2.0

    if config.fit_t1 is None:
        config.fit_t1 = config.T
    if config.fit_t0 is None:
        config.fit_t0 = config.T / 10.0


def _require(condition: bool, key: str, message: str):
    if not condition:
        raise ValidationError(f"{key}: {message}", key=key)


def validate(config: ExperimentConfig):
    _require(config.dimension in (1, 2), "dimension", "ожидается 1 или 2")
    _require(len(config.lengths) == config.dimension, "lengths", f"нужно {config.dimension} значений")
    _require(len(config.counts) == config.dimension, "counts", f"нужно {config.dimension} значений")
    _require(all(L > 0 for L in config.lengths), "lengths", "должны быть положительными")
    _require(all(c >= constants.MIN_INTERIOR_POINTS for c in config.counts), "counts",
             f"не меньше {constants.MIN_INTERIOR_POINTS} узлов по каждой оси")
    _require(config.j in (0, 1, 2), "j", "ожидается 0, 1 или 2")
    _require(config.initial in INITIAL_PROFILES, "initial", f"ожидается {'|'.join(INITIAL_PROFILES)}")
    _require(config.history in HISTORY_PROFILES, "history", f"ожидается {'|'.join(HISTORY_PROFILES)}")
    _require(config.scheme in [s.value for s in Scheme], "scheme", "ожидается strang_cn|implicit_euler")
    _require(config.amplitude > 0, "amplitude", "должна быть положительной")
    _require(config.width > 0, "width", "должна быть положительной")
    _require(config.history_rate > 0, "history_rate", "должна быть положительной")
    _require(config.dt > 0, "dt", "должен быть положительным")
    _require(config.T >= 0, "T", "не может быть отрицательным")
    _require(config.record_stride >= 1, "record_stride", "не меньше 1")
    _require(config.snapshot_stride >= 0, "snapshot_stride", "не меньше 0")
    _require(config.s_uniform > 0, "s_uniform", "должен быть положительным")
    _require(config.s_ratio >= 1, "s_ratio", "не меньше 1")
    _require(0 < config.tail_tol < 1, "tail_tol", "ожидается значение в (0, 1)")
    _require(config.n >= 1, "n", "не меньше 1")
    _require(config.p > 1, "p", "должна быть больше 1")
    _require(config.alpha0 is None or config.alpha0 > 0, "alpha0", "должна быть положительной")
    _require(config.eps0 is None or config.eps0 > 0, "eps0", "должна быть положительной")
    _require(config.solver_tol > 0, "solver_tol", "должна быть положительной")
    _require(config.solver_maxiter >= 1, "solver_maxiter", "не меньше 1")
    _require(config.fit_t0 > 0 or config.T == 0, "fit_t0", "должно быть положительным")
    _require(config.fit_t1 >= config.fit_t0, "fit_t1", "не меньше fit_t0")
    for name in ("output_dir", "csv_name", "report_name"):
        _require(bool(getattr(config, name)), name, "не может быть пустым")
