# app/storage/serialization.py

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from app.core.errors import ConfigInvalid
from app.core.measure import DiscreteMeasure, make_measure
from app.metrics.grid import BreakpointGrid

PathLike = Union[str, Path]

# Shortest repr round-trips doubles, so reruns produce identical bytes
CSV_FLOAT_FORMAT = "%.17g"


# Function to turn a measure into the JSON array of [position, weight] pairs
def measure_to_json(m: DiscreteMeasure) -> List[List[float]]:
    return [[float(x), float(w)] for x, w in m.atoms]


# Function to build a measure back from [position, weight] pairs
def measure_from_json(data: Any, field_path: str = "measure") -> DiscreteMeasure:
    if not isinstance(data, list):
        raise ConfigInvalid(field_path, "expected an array of [position, weight] pairs")
    atoms = []
    for k, pair in enumerate(data):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ConfigInvalid(f"{field_path}.{k}", "expected a [position, weight] pair")
        atoms.append((float(pair[0]), float(pair[1])))
    return make_measure(atoms)


def grid_from_json(data: Any, field_path: str = "grid") -> BreakpointGrid:
    try:
        return BreakpointGrid.from_points([float(x) for x in data])
    except (TypeError, ValueError) as e:
        raise ConfigInvalid(field_path, str(e)) from e


def load_json_argument(value: str) -> Any:
    """Read a JSON document given either inline or as a path to a file."""
    candidate = Path(value)
    try:
        if candidate.is_file():
            return json.loads(candidate.read_text(encoding="utf-8"))
    except OSError:
        pass
    return json.loads(value)


def write_json(data: Any, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")
    logging.info(f"JSON written: {path}")
    return path


def write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    logging.info(f"CSV written: {path} ({len(frame)} rows)")
    return path


def write_snapshots(snapshots: Sequence[DiscreteMeasure], times: np.ndarray, name: str,
                    every: int, out_dir: PathLike) -> List[Path]:
    """Dump every `every`-th snapshot (and the last one) to snapshot_<name>_<k>.json."""
    if every <= 0:
        return []
    out_dir = Path(out_dir)
    indices = sorted(set(range(0, len(snapshots), every)) | {len(snapshots) - 1})
    written = []
    for k in indices:
        payload: Dict[str, Any] = {"step": k, "t": float(times[k]), "atoms": measure_to_json(snapshots[k])}
        written.append(write_json(payload, out_dir / f"snapshot_{name}_{k}.json"))
    return written
