# configs/app_config.py

from pathlib import Path
import sys
import os
import logging
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

project_root = Path(__file__).resolve().parents[1]
sys.path.append(str(project_root))

from configs.env_config import load_env

LOG_FORMAT = '%(asctime)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s'

# Config for app/core/measure.py

# Two positions are the same atom iff |a-b| <= POSITION_RTOL * max(1, |a|, |b|)
POSITION_RTOL = 1e-12
# Metric paths never drop atoms
DEFAULT_DROP_TOLERANCE = 0.0

# Config for app/metrics/distances.py

# Total masses closer than this are treated as equal by the Wasserstein distance
MASS_TOL = 1e-12
# Agreement required between fast paths and the brute-force oracle
METRIC_TOL = 1e-9
# Up to this many support points the flat LP goes through the dense simplex,
# larger problems use the exact envelope recursion
SIMPLEX_MAX_SUPPORT = 24

# Config for app/metrics/oracle.py
ORACLE_MAX_SUPPORT = 6

# Config for app/dynamics/characteristics.py
DEFAULT_QUAD_STEPS = 200
ETA_TOL = 1e-6

# Config for app/dynamics/simulator.py

# Weights below this are folded into the nearest surviving atom during long runs
SIM_DROP_TOLERANCE = 1e-14
# Merge width for outflow atoms in long runs, as a fraction of the smallest interval
LONG_RUN_MERGE_FRACTION = 1e-6

# Config for app/reference/closed_form.py
SPEED_RAMP_WIDTH = 1e-6
DEFAULT_OUTFLOW_ATOMS = 2000

# Config for app/stability/checks.py
BOUND_TOL = 1e-6
# C in the "C * dt" discretization allowance of the bound checks
DEFAULT_ALLOWANCE_FACTOR = 4.0
APPENDIX_SAMPLES = 1000

# Config for app/graph.py

NODE_VALIDATE = "validate"
NODE_SIMULATE = "simulate"
NODE_METRICS = "metrics"
NODE_STABILITY = "stability"
NODE_REPORT = "report"

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_VIOLATION = 2


class MTLabSettings(BaseSettings):
    """Process-level settings read from the environment (MTLAB_*)."""

    model_config = SettingsConfigDict(env_prefix="MTLAB_", extra="ignore")

    workers: Optional[int] = Field(default=None, ge=1, description="Worker count for concurrent runs")
    output_dir: Path = Field(default=project_root / "outputs", description="Default artifact directory")


_settings: Optional[MTLabSettings] = None

def get_settings(reload: bool = False) -> MTLabSettings:
    global _settings
    if _settings is None or reload:
        load_env()
        _settings = MTLabSettings()
        logging.debug(f"Settings loaded: workers={_settings.workers}, output_dir={_settings.output_dir}")
    return _settings


def resolve_workers(flag_value: Optional[int] = None) -> int:
    # MTLAB_WORKERS wins over the flag, the flag over the machine default
    settings = get_settings(reload=True)
    if settings.workers is not None:
        return settings.workers
    if flag_value is not None and flag_value >= 1:
        return flag_value
    return os.cpu_count() or 1
