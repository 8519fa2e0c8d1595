#!/usr/bin/env python3
"""
SweepManager - параллельный прогон всех *.cfg из каталога.
Каждый эксперимент пишет в свой подкаталог <output_root>/<имя файла>/.
"""

import glob
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional

from config.experiment_config import parse_config
from config.settings import settings
from core.errors import SimulationError
from services.experiment.experiment_runner import run_experiment

logger = logging.getLogger(__name__)


class SweepManager:
    def __init__(self, directory: str, workers: Optional[int] = None, output_root: Optional[str] = None):
        self.directory = directory
        self.workers = workers or settings.SWEEP_WORKERS
        self.output_root = output_root

    def discover(self) -> List[str]:
        return sorted(glob.glob(os.path.join(self.directory, "*.cfg")))

    def run_one(self, path: str) -> int:
        stem = os.path.splitext(os.path.basename(path))[0]
        try:
            config = parse_config(path)
            config.output_dir = stem
            return run_experiment(config, self.output_root)
        except SimulationError as error:
            logger.error(f"❌ {stem}: {error}")
            return error.exit_code

    def run(self) -> Dict[str, int]:
        """Возвращает {имя конфигурации: код возврата}."""
        paths = self.discover()
        if not paths:
            logger.warning(f"⚠️ В {self.directory} нет файлов *.cfg")
            return {}

        logger.info(f"🚀 Серия из {len(paths)} экспериментов, потоков: {self.workers}")
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            statuses = list(pool.map(self.run_one, paths))

        results = {os.path.splitext(os.path.basename(p))[0]: s for p, s in zip(paths, statuses)}
        for name, status in results.items():
            mark = "✅" if status == 0 else "❌"
            logger.info(f"{mark} {name}: код {status}")
        return results
