# scripts/reproduce_all.py

import logging
import sys
import time
from pathlib import Path

project_root = Path(__file__).resolve().parents[1]
sys.path.append(str(project_root))

from app.acceptance import reproduce_all
from configs.app_config import LOG_FORMAT, resolve_workers
from configs.script_config import DEFAULT_SEED, REPRODUCE_OUTPUT_DIR

logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)

# Define the main function of our script
def main():
    logging.info("Starting the acceptance suite...")
    script_start_time = time.time()

    # MTLAB_WORKERS, when set, decides the worker count
    workers = resolve_workers(None)
    logging.info(f"Workers: {workers}, seed: {DEFAULT_SEED}, output: {REPRODUCE_OUTPUT_DIR}")

    exit_code = reproduce_all(workers=workers, seed=DEFAULT_SEED, output_dir=REPRODUCE_OUTPUT_DIR)

    logging.info(f"=== Acceptance suite finished with exit code {exit_code} ===")
    logging.info(f"Total elapsed time: {time.time() - script_start_time:.2f} seconds.")
    return exit_code

if __name__ == "__main__":
    sys.exit(main())
