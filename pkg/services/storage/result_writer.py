# services/storage/result_writer.py
"""
Запись energies.csv и report.txt.
CSV побайтно стабилен: фиксированный заголовок, числа через repr, перевод строки "\n".
"""

import logging
import os
from typing import Iterable, List, Optional

from models.simulation import EnergyRecord

logger = logging.getLogger(__name__)

CSV_HEADER = "t,E,D,E1,E2,mon_eq30,mon_eq37,mon_eq43,mon_eq49"


def format_number(value: Optional[float]) -> str:
    if value is None:
        return ""
    return repr(float(value))


def csv_row(record: EnergyRecord) -> str:
    monitors = record.monitors
    cells = [
        record.t,
        record.energy,
        record.dissipation,
        record.e1,
        record.e2,
        monitors.h1 if monitors else None,
        monitors.h2 if monitors else None,
        monitors.bound if monitors else None,
        monitors.convex if monitors else None,
    ]
    return ",".join(format_number(cell) for cell in cells)


# =============================================================================
# КОНТЕКСТ ЗАПИСИ
# =============================================================================

class ResultWriter:
    """
    with ResultWriter(directory, "energies.csv", "report.txt") as writer:
        writer.write_records(records)
        writer.write_report(lines)
    Файлы закрываются даже при ошибке; частичный CSV остаётся на диске.
    """

    def __init__(self, directory: str, csv_name: str = "energies.csv", report_name: str = "report.txt"):
        self.directory = directory
        self.csv_path = os.path.join(directory, csv_name)
        self.report_path = os.path.join(directory, report_name)
        self._csv = None

    def __enter__(self):
        os.makedirs(self.directory, exist_ok=True)
        self._csv = open(self.csv_path, "w", encoding="utf-8", newline="")
        self._csv.write(CSV_HEADER + "\n")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type:
            logger.error(f"❌ Ошибка при записи результатов в {self.directory}: {exc_val}")
            self.write_error(str(exc_val))
        self._csv.flush()
        self._csv.close()
        self._csv = None

    # -------------------------------------------------------------------------

    def write_records(self, records: Iterable[EnergyRecord]):
        for record in records:
            self._csv.write(csv_row(record) + "\n")
        self._csv.flush()

    def write_error(self, message: str):
        # одна строка, чтобы CSV оставался читаемым построчно
        self._csv.write(f"# error: {' '.join(message.split())}\n")

    def write_report(self, lines: List[str]):
        with open(self.report_path, "w", encoding="utf-8", newline="") as handle:
            handle.write("\n".join(lines) + "\n")
        logger.info(f"💾 Отчёт сохранён: {self.report_path}")
