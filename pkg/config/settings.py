import os
from dotenv import load_dotenv

load_dotenv()

class Settings:
    # Outputs
    OUTPUT_ROOT = os.getenv('BIMEM_OUTPUT_ROOT', 'results')

    # Linear algebra
    DIRECT_SOLVER_MAX_SIZE = int(os.getenv('DIRECT_SOLVER_MAX_SIZE', '20000'))

    # Sweeps
    SWEEP_WORKERS = int(os.getenv('SWEEP_WORKERS', '4'))

    # App settings
    DEBUG = os.getenv('DEBUG', 'False').lower() == 'true'
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')

settings = Settings()
