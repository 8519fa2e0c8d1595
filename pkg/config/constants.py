# config/constants.py
"""
Числовые константы по умолчанию.
Все значения можно переопределить через файл эксперимента.
"""

# -----------------------------------------------------------------------------
# ПРОСТРАНСТВЕННАЯ СЕТКА
# -----------------------------------------------------------------------------

MIN_INTERIOR_POINTS = 8

POINCARE_TOL = 1e-8
POINCARE_MAX_ITER = 10000

# -----------------------------------------------------------------------------
# S-СЕТКА ПАМЯТИ
# -----------------------------------------------------------------------------

DEFAULT_TAIL_TOL = 1e-10
DEFAULT_S_RATIO = 1.05
DEFAULT_S_UNIFORM = 1.0
S_MAX_CAP = 1e12

# -----------------------------------------------------------------------------
# ПРОВЕРКА ЯДЕР
# -----------------------------------------------------------------------------

ASSUMPTION_UNIFORM_POINTS = 1001
ASSUMPTION_GEOMETRIC_RATIO = 1.1
ASSUMPTION_INTEGRAND_FLOOR = 1e-14
ASSUMPTION_S_CAP = 1e15
ASSUMPTION_DIVERGENCE_JUMP = 0.01
ASSUMPTION_G0_RTOL = 1e-4
ASSUMPTION_SAMPLE_RTOL = 1e-9

INVERSION_RTOL = 1e-14
INVERSION_MAX_DOUBLINGS = 1100

# -----------------------------------------------------------------------------
# ЭВОЛЮЦИЯ
# -----------------------------------------------------------------------------

DEFAULT_DT = 1e-3
DEFAULT_RECORD_STRIDE = 10
DEFAULT_SOLVER_TOL = 1e-10
DEFAULT_SOLVER_MAXITER = 1000
PROGRESS_FRACTION = 0.1

# -----------------------------------------------------------------------------
# МОНИТОРЫ И АНАЛИЗ ЗАТУХАНИЯ
# -----------------------------------------------------------------------------

MONITOR_FLOOR = 1e-14
MIN_FIT_POINTS = 10
MAX_FIT_POINTS = 50
CONFIDENT_R2 = 0.9
ALPHA_CAP_FACTOR = 1e6
ENVELOPE_RTOL = 1e-12
BISECTION_STEPS = 200

# -----------------------------------------------------------------------------
# ПРОВЕРКИ ОТЧЁТА
# -----------------------------------------------------------------------------

CONSERVATION_RTOL = 1e-10
MONOTONE_RTOL = 1e-8
HIGHER_ENERGY_BAND = 1e-6
