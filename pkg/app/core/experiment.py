# app/core/experiment.py

"""
Experiment configuration as read from a model file.

A model file is one JSON object: the grid, the coefficient tables (g1, p1,
one table per c_i, optional per-interval p2 tables), named initial measures,
the solver block and the reporting options. Tables are [[knot, value], ...].

`random_pairs` adds that many seeded pairs (a random measure and a small
perturbation of it) next to the named ones; `seed` fixes the draws.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.errors import ConfigInvalid
from app.core.measure import DiscreteMeasure, make_measure
from app.dynamics.coefficients import IntervalFunction, ModelCoefficients, PiecewiseLinearFn
from app.metrics.grid import BreakpointGrid, MetricKind
from app.stability.sweep import perturb, random_measure
from configs.app_config import DEFAULT_ALLOWANCE_FACTOR, DEFAULT_QUAD_STEPS

Table = List[Tuple[float, float]]


def _check_table(table: Table) -> Table:
    if not table:
        raise ValueError("a table needs at least one [knot, value] row")
    knots = [row[0] for row in table]
    if any(b <= a for a, b in zip(knots, knots[1:])):
        raise ValueError("knots must be strictly increasing")
    return table


class SolverSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dt: float = Field(..., gt=0, description="Time step")
    T: float = Field(..., gt=0, description="Horizon")
    quad_particles_per_step: int = Field(1, ge=1)
    merge_tolerance: float = Field(0.0, ge=0)
    drop_tolerance: float = Field(0.0, ge=0)
    quad_steps: int = Field(DEFAULT_QUAD_STEPS, ge=1, description="Quadrature atoms for branching measures")


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grid: List[float] = Field(..., min_length=2)
    g1: Table
    c: List[Table]
    p1: Table = Field(default_factory=lambda: [(0.0, 0.0)])
    p2: Optional[List[Table]] = None
    initial_measures: Dict[str, List[Tuple[float, float]]] = Field(default_factory=dict)
    solver: SolverSpec
    metrics: List[MetricKind] = Field(default_factory=lambda: [MetricKind.MT, MetricKind.FLAT])
    pairs: List[Tuple[str, str]] = Field(default_factory=list)
    output_dir: Optional[str] = None
    snapshot_every: int = Field(0, ge=0)
    check_stride: int = Field(1, ge=1)
    allowance_factor: float = Field(DEFAULT_ALLOWANCE_FACTOR, ge=0)
    seed: int = Field(0, ge=0, description="Seed for the generated random pairs")
    random_pairs: int = Field(0, ge=0)

    @field_validator("g1", "p1")
    @classmethod
    def _table(cls, value: Table) -> Table:
        return _check_table(value)

    @field_validator("c", "p2")
    @classmethod
    def _tables(cls, value: Optional[List[Table]]) -> Optional[List[Table]]:
        if value is not None:
            for table in value:
                _check_table(table)
        return value

    @field_validator("grid")
    @classmethod
    def _increasing(cls, value: List[float]) -> List[float]:
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("grid points must be strictly increasing")
        return value

    @field_validator("initial_measures")
    @classmethod
    def _nonnegative(cls, value: Dict[str, List[Tuple[float, float]]]) -> Dict[str, List[Tuple[float, float]]]:
        for name, atoms in value.items():
            if any(w < 0 for _, w in atoms):
                raise ValueError(f"measure '{name}' has a negative weight")
        return value

    @model_validator(mode="after")
    def _known_pairs(self) -> "ExperimentConfig":
        generated = self.random_names()
        for name in generated:
            if name in self.initial_measures:
                raise ValueError(f"measure name '{name}' is reserved for generated pairs")
        for a, b in self.pairs:
            for name in (a, b):
                if name not in self.initial_measures and name not in generated:
                    raise ValueError(f"pair refers to unknown measure '{name}'")
        return self

    def breakpoint_grid(self) -> BreakpointGrid:
        return BreakpointGrid.from_points(self.grid)

    def build_model(self) -> ModelCoefficients:
        """Coefficients checked against the standing assumptions (raises AssumptionViolated)."""
        grid = self.breakpoint_grid()
        p2 = None
        if self.p2 is not None:
            p2 = IntervalFunction(grid, tuple(PiecewiseLinearFn.from_table(t) for t in self.p2))
        return ModelCoefficients(
            grid=grid,
            g1=PiecewiseLinearFn.from_table(self.g1),
            c=tuple(PiecewiseLinearFn.from_table(t) for t in self.c),
            p1=PiecewiseLinearFn.from_table(self.p1),
            p2=p2,
        )

    def random_names(self) -> List[str]:
        return [name for k in range(self.random_pairs) for name in (f"random{k}", f"random{k}_perturbed")]

    def random_measures(self) -> Dict[str, DiscreteMeasure]:
        if not self.random_pairs:
            return {}
        rng = np.random.default_rng(self.seed)
        grid = self.breakpoint_grid()
        generated = {}
        for k in range(self.random_pairs):
            base = random_measure(rng, grid)
            generated[f"random{k}"] = base
            generated[f"random{k}_perturbed"] = perturb(base, rng, grid)
        return generated

    def measures(self) -> Dict[str, DiscreteMeasure]:
        named = {name: make_measure(atoms) for name, atoms in self.initial_measures.items()}
        named.update(self.random_measures())
        return named

    def resolved_pairs(self) -> List[Tuple[str, str]]:
        # Without explicit pairs the first two named measures are compared
        if self.pairs:
            pairs = list(self.pairs)
        else:
            names = list(self.initial_measures)
            pairs = [(names[0], names[1])] if len(names) >= 2 else []
        generated = self.random_names()
        pairs.extend([pair for pair in zip(generated[0::2], generated[1::2]) if pair not in pairs])
        return pairs


def _error_path(error: ValidationError) -> Tuple[str, str]:
    first = error.errors()[0]
    path = ".".join(str(part) for part in first["loc"]) or "<root>"
    return path, first["msg"]


def parse_experiment(data) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        path, message = _error_path(e)
        logging.error(f"Invalid experiment configuration at '{path}': {message}")
        raise ConfigInvalid(path, message) from e


def load_experiment(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigInvalid("<file>", f"cannot read {path}: {e}") from e
    logging.info(f"Experiment configuration read from {path}")
    return parse_experiment(data)
