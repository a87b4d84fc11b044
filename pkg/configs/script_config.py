# configs/script_config.py

import sys
from pathlib import Path

project_root = Path(__file__).resolve().parents[1]
sys.path.append(str(project_root))

# Directory where reproduce-all writes its tables
REPRODUCE_OUTPUT_DIR = project_root / "outputs" / "reproduce"

# Config for app/acceptance.py

# Random pairs for oracle equivalence, axioms and the ordering chain
RANDOM_PAIRS = 200
ORACLE_MAX_ATOMS = 5
AXIOM_MAX_ATOMS = 8

# Mass conservation: models x initial measures, horizon in units of T_int
MASS_MODELS = 10
MASS_MEASURES = 10
MASS_HORIZON_INTERVALS = 5.0
MASS_STEPS_PER_INTERVAL = 100

# eta normalization draws
ETA_DRAWS = 50
ETA_QUAD_STEPS = 200

# Global stability sweep
SWEEP_PAIRS = 20
SWEEP_FAMILIES = ("constant", "speed_coupled", "outflow_coupled")
SWEEP_HORIZON_INTERVALS = 3.0
SWEEP_STEPS_PER_INTERVAL = 500
# Snapshot stride for the bound checks in the sweep
SWEEP_CHECK_STRIDE = 25
# v at x_N jumps by at most the mass of both measures, each jump costs up to one dt
NONLINEAR_ALLOWANCE_FACTOR = 10.0

# Constant-outflow convergence study
CONVERGENCE_BASE_STEPS = 50
CONVERGENCE_HALVINGS = 3
CONVERGENCE_REFERENCE_ATOMS = 8000

DEFAULT_SEED = 20240611
