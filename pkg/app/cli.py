# app/cli.py

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import pandas as pd

project_root = Path(__file__).resolve().parents[1]
sys.path.append(str(project_root))

from app.core.errors import ConfigInvalid, MTLabError
from app.core.experiment import ExperimentConfig, load_experiment
from app.dynamics.simulator import simulate
from app.metrics import distances
from app.metrics.grid import MetricKind
from app.reference.closed_form import ExampleName, ExampleSetup
from app.stability.checks import check_nonlinear_estimate, stability_table
from app.stability.constants import compute_global_constants
from app.storage.serialization import (
    grid_from_json, load_json_argument, measure_from_json, write_frame, write_json, write_snapshots
)
from configs.app_config import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_VIOLATION, LOG_FORMAT, resolve_workers
from configs.script_config import DEFAULT_SEED

logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)

EXAMPLE_STEPS = 400
EXAMPLE_ROW_STRIDE = 10


def _with_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    solver = config.solver.model_copy(update={
        key: value for key, value in (("dt", args.dt), ("T", args.horizon)) if value is not None
    })
    update = {"solver": solver}
    if getattr(args, "seed", None) is not None:
        update["seed"] = args.seed
    return config.model_copy(update=update)


def _pick_measure(config: ExperimentConfig, name: Optional[str]) -> Tuple[str, object]:
    measures = config.measures()
    if not measures:
        raise ConfigInvalid("initial_measures", "the model file names no initial measures")
    name = name or next(iter(measures))
    if name not in measures:
        raise ConfigInvalid("initial_measures", f"unknown measure '{name}', have {list(measures)}")
    return name, measures[name]


def cmd_metric(args) -> int:
    kind = MetricKind(args.kind)
    grid = grid_from_json(load_json_argument(args.grid)) if args.grid else None
    m1 = measure_from_json(load_json_argument(args.m1), "m1")
    m2 = measure_from_json(load_json_argument(args.m2), "m2")
    value = distances.compute_metric(kind, m1, m2, grid)
    print(f"{value:.15g}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _with_overrides(load_experiment(args.model), args)
    model = config.build_model()
    name, m0 = _pick_measure(config, args.measure)
    solver = config.solver
    trajectory = simulate(m0, model, solver.T, solver.dt,
                          quad_particles_per_step=solver.quad_particles_per_step,
                          merge_tolerance=solver.merge_tolerance,
                          drop_tolerance=solver.drop_tolerance)
    out = Path(args.out)
    write_frame(trajectory.to_frame(), out)
    every = args.snapshot_every if args.snapshot_every is not None else config.snapshot_every
    write_snapshots(trajectory.snapshots, trajectory.times, name, every, out.parent)
    return EXIT_OK


def example_table(which: str, steps: int = EXAMPLE_STEPS, stride: int = EXAMPLE_ROW_STRIDE) -> pd.DataFrame:
    """Analytic and simulated MT distances of a worked configuration, with the global bound."""
    setup = ExampleSetup.standard(which)
    model = setup.model()
    m1, m2 = setup.initial_pair()
    dt = setup.horizon / steps
    traj1 = simulate(m1, model, setup.horizon, dt)
    traj2 = simulate(m2, model, setup.horizon, dt)
    constants = compute_global_constants(model, m1, m2)
    rho0 = distances.mt_metric(m1, m2, setup.grid)

    rows = []
    for k in range(0, len(traj1), stride):
        t = float(traj1.times[k])
        a1, a2 = setup.evaluate(min(t, setup.horizon))
        row = {
            "t": t,
            "analytic_mt": distances.mt_metric(a1, a2, setup.grid),
            "simulated_mt": distances.mt_metric(traj1.snapshots[k], traj2.snapshots[k], setup.grid),
            "bound": constants.global_bound(t, rho0),
        }
        if setup.name is ExampleName.FROZEN_VS_FREE:
            row["analytic_flat"] = distances.flat_metric(a1, a2)
        rows.append(row)
    return pd.DataFrame(rows)


def cmd_examples(args) -> int:
    table = example_table(args.which)
    write_frame(table, args.out)
    violated = table["simulated_mt"] > table["bound"] + 1e-9
    return EXIT_VIOLATION if violated.any() else EXIT_OK


def _parse_pairs(value: Optional[str], config: ExperimentConfig) -> List[Tuple[str, str]]:
    if value is None:
        return config.resolved_pairs()
    data = load_json_argument(value)
    if data and isinstance(data[0], str):
        data = [data]
    pairs = [(str(a), str(b)) for a, b in data]
    known = set(config.initial_measures) | set(config.random_names())
    for name in sorted({n for pair in pairs for n in pair}):
        if name not in known:
            raise ConfigInvalid("pairs", f"unknown measure '{name}'")
    return pairs


def cmd_stability(args) -> int:
    config = _with_overrides(load_experiment(args.model), args)
    model = config.build_model()
    measures = config.measures()
    pairs = _parse_pairs(args.pairs, config)
    if not pairs:
        raise ConfigInvalid("pairs", "no pair of initial measures to compare")
    solver = config.solver
    allowance = config.allowance_factor * solver.dt
    out = Path(args.out)
    violations = 0
    for index, (a, b) in enumerate(pairs):
        traj_a = simulate(measures[a], model, solver.T, solver.dt,
                          quad_particles_per_step=solver.quad_particles_per_step,
                          merge_tolerance=solver.merge_tolerance, drop_tolerance=solver.drop_tolerance)
        traj_b = simulate(measures[b], model, solver.T, solver.dt,
                          quad_particles_per_step=solver.quad_particles_per_step,
                          merge_tolerance=solver.merge_tolerance, drop_tolerance=solver.drop_tolerance)
        constants = compute_global_constants(model, measures[a], measures[b])
        table = stability_table(traj_a, traj_b, constants, config.check_stride, allowance)
        nonlinear = check_nonlinear_estimate(traj_a, traj_b, constants, config.check_stride, allowance)
        violations += int(table["violated"].sum()) + nonlinear.violations
        target = out if index == 0 else out.with_name(f"{out.stem}_{a}__{b}{out.suffix}")
        write_frame(table, target)
    logging.info(f"stability: {violations} violation(s) over {len(pairs)} pair(s)")
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_constants(args) -> int:
    config = load_experiment(args.model)
    model = config.build_model()
    measures = config.measures()
    pairs = _parse_pairs(args.pairs, config)
    if pairs:
        mu1_0, mu2_0 = measures[pairs[0][0]], measures[pairs[0][1]]
    else:
        _, mu1_0 = _pick_measure(config, None)
        mu2_0 = mu1_0
    constants = compute_global_constants(model, mu1_0, mu2_0)
    data = constants.to_dict()
    T = 0.5 * constants.T_max
    try:
        data["C1_half_Tmax"] = constants.C1_of_T(T)
    except MTLabError as e:
        logging.warning(f"C1 at T={T:.6g} unavailable: {e}")
        data["C1_half_Tmax"] = None
    if args.out:
        write_json(data, args.out)
    print(json.dumps(data, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_reproduce_all(args) -> int:
    from app.acceptance import reproduce_all
    return reproduce_all(list_only=args.list, workers=resolve_workers(args.workers), seed=args.seed,
                         only=args.only, output_dir=args.out)


def cmd_run(args) -> int:
    from app.graph import run
    config = _with_overrides(load_experiment(args.model), args)
    return run(config, output_dir=args.out, workers=args.workers)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtlab", description="Measure-transmission metrics and transport simulations")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metric", help="Distance between two measures")
    p.add_argument("--kind", choices=[k.value for k in MetricKind], required=True)
    p.add_argument("--grid", help="JSON array of breakpoints (inline or file); required for mt")
    p.add_argument("--m1", required=True, help="JSON array of [position, weight] pairs (inline or file)")
    p.add_argument("--m2", required=True)
    p.set_defaults(handler=cmd_metric)

    p = sub.add_parser("simulate", help="Particle simulation of one initial measure")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--measure", help="Initial measure name (default: the first one)")
    p.add_argument("--dt", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--snapshot-every", type=int, dest="snapshot_every")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("examples", help="Closed-form configurations against the simulator")
    p.add_argument("--which", choices=[e.value for e in ExampleName], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_examples)

    p = sub.add_parser("stability", help="Check the stability bounds on simulated pairs")
    p.add_argument("--model", required=True)
    p.add_argument("--pairs", help='JSON list of ["a", "b"] measure-name pairs')
    p.add_argument("--out", required=True)
    p.add_argument("--dt", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--seed", type=int, help="Seed for the generated random pairs")
    p.set_defaults(handler=cmd_stability)

    p = sub.add_parser("constants", help="Print the stability constants as JSON")
    p.add_argument("--model", required=True)
    p.add_argument("--pairs")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_constants)

    p = sub.add_parser("reproduce-all", help="Run every acceptance check")
    p.add_argument("--list", action="store_true", help="Only print the check names")
    p.add_argument("--only", nargs="+", help="Run only these checks")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", help="Directory for the pass/fail table")
    p.set_defaults(handler=cmd_reproduce_all)

    p = sub.add_parser("run", help="Full experiment pipeline from a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="Artifact directory (default: MTLAB_OUTPUT_DIR)")
    p.add_argument("--workers", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--seed", type=int, help="Seed for the generated random pairs")
    p.set_defaults(handler=cmd_run)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        return args.handler(args)
    except MTLabError as e:
        logging.error(f"{type(e).__name__}: {e}")
        return EXIT_CONFIG_ERROR
    except ValueError as e:
        # JSON decoding errors on inline arguments
        logging.error(f"Invalid argument: {e}")
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
