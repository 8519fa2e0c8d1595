#!/usr/bin/env python3
"""
BiMemLab - лаборатория бигармонического уравнения Шрёдингера с бесконечной памятью.

    python main.py simulate scenarios/exp_decay.cfg
    python main.py verify identities
    python main.py sweep scenarios/

Коды выхода: 0 - успех, 1 - провалена проверка, 2 - ошибка конфигурации,
3 - численная ошибка.
"""

import argparse
import logging
import sys

from config.experiment_config import parse_config
from config.settings import settings
from core.errors import SimulationError
from services.experiment.experiment_runner import run_experiment
from services.experiment.sweep_manager import SweepManager
from services.verification.verify_suites import SUITES, verify

logger = logging.getLogger('BiMemLab')


def setup_logging():
    level = logging.DEBUG if settings.DEBUG else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
    # stdout занят строками PASS/FAIL, логи идут в stderr
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler(sys.stderr)],
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bimemlab", description="Эксперименты с затуханием энергии")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="прогон одной конфигурации")
    simulate.add_argument("config")
    simulate.add_argument("--output-root", default=None, help=f"по умолчанию {settings.OUTPUT_ROOT}")

    check = commands.add_parser("verify", help="встроенные наборы проверок")
    check.add_argument("suite", choices=sorted(SUITES) + ["all"])

    sweep = commands.add_parser("sweep", help="все *.cfg из каталога")
    sweep.add_argument("directory")
    sweep.add_argument("--workers", type=int, default=None)
    sweep.add_argument("--output-root", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging()

    try:
        if args.command == "simulate":
            return run_experiment(parse_config(args.config), args.output_root)
        if args.command == "verify":
            return verify(args.suite)
        statuses = SweepManager(args.directory, args.workers, args.output_root).run()
        return max(statuses.values(), default=0)
    except SimulationError as error:
        logger.error(f"❌ {error}")
        return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
