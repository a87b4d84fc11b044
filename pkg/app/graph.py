# app/graph.py

"""
Experiment pipeline behind `run`: validate -> simulate -> metrics -> stability -> report.

Every node returns a partial state update; a node that fails records
`error_message` and `exit_code` and the graph jumps straight to the report.
"""

import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from langgraph.graph import StateGraph, END

project_root = Path(__file__).resolve().parents[1]
sys.path.append(str(project_root))

from app.core.errors import HorizonExceeded, MTLabError, UnequalMass
from app.core.experiment import ExperimentConfig
from app.core.measure import DiscreteMeasure
from app.core.state import PipelineState
from app.dynamics.characteristics import superposition_eval
from app.dynamics.coefficients import ModelCoefficients
from app.dynamics.simulator import Trajectory, simulate
from app.metrics.distances import compute_metric
from app.metrics.grid import MetricKind
from app.stability.checks import check_nonlinear_estimate, stability_table
from app.stability.constants import compute_global_constants
from app.storage.serialization import write_frame, write_json, write_snapshots

from configs.app_config import (
    LOG_FORMAT, NODE_VALIDATE, NODE_SIMULATE, NODE_METRICS, NODE_STABILITY, NODE_REPORT,
    EXIT_OK, EXIT_CONFIG_ERROR, EXIT_VIOLATION, get_settings, resolve_workers
)

logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)


def _failure(node: str, e: Exception) -> Dict[str, Any]:
    logging.error(f"[{node}] {type(e).__name__}: {e}", exc_info=True)
    return {"error_message": f"{type(e).__name__}: {e}", "exit_code": EXIT_CONFIG_ERROR}


def _pair_label(a: str, b: str) -> str:
    return f"{a}__{b}"


def _first_moment(m: DiscreteMeasure) -> float:
    return float(m.positions @ m.weights)


def _superposition_row(name: str, m0: DiscreteMeasure, model: ModelCoefficients, trajectory: Trajectory,
                       quad_steps: int) -> Optional[Dict[str, Any]]:
    """First moment at T from the particles and from the superposition formula on the simulated v."""
    series = trajectory.v_series[:-1] if len(trajectory.v_series) > 1 else trajectory.v_series
    try:
        expected = superposition_eval(m0, lambda x: x, model, series, trajectory.dt, trajectory.horizon, quad_steps)
    except HorizonExceeded as e:
        logging.warning(f"[SimulateNode] No superposition cross-check for '{name}': {e}")
        return None
    simulated = _first_moment(trajectory.snapshots[-1])
    return {"measure": name, "t": trajectory.horizon, "simulated": simulated,
            "superposition": expected, "gap": abs(simulated - expected)}


def _simulate_one(job: Tuple[str, DiscreteMeasure, ModelCoefficients, Dict[str, Any]]):
    name, m0, model, solver = job
    trajectory = simulate(
        m0, model, solver["T"], solver["dt"],
        quad_particles_per_step=solver["quad_particles_per_step"],
        merge_tolerance=solver["merge_tolerance"],
        drop_tolerance=solver["drop_tolerance"],
    )
    return name, trajectory, _superposition_row(name, m0, model, trajectory, solver["quad_steps"])


def validate_node(state: PipelineState) -> Dict[str, Any]:
    logging.info("[ValidateNode] Running...")
    config: ExperimentConfig = state["config"]
    try:
        model = config.build_model()
        measures = config.measures()
        pairs = config.resolved_pairs()
        logging.info(f"[ValidateNode] N={model.N}, measures={list(measures)}, pairs={pairs}")
        return {"model": model, "measures": measures, "pairs": pairs, "artifacts": [], "violations": 0}
    except MTLabError as e:
        return _failure("ValidateNode", e)


def simulate_node(state: PipelineState) -> Dict[str, Any]:
    logging.info("[SimulateNode] Running...")
    config: ExperimentConfig = state["config"]
    out_dir = Path(state["output_dir"])
    solver = config.solver.model_dump()
    jobs = [(name, m0, state["model"], solver) for name, m0 in state["measures"].items()]
    workers = state.get("workers", 1)
    try:
        if workers > 1 and len(jobs) > 1:
            # map keeps config order whatever the completion order
            with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
                results = list(pool.map(_simulate_one, jobs))
        else:
            results = [_simulate_one(job) for job in jobs]
    except MTLabError as e:
        return _failure("SimulateNode", e)

    artifacts = list(state.get("artifacts", []))
    trajectories = {}
    cross_check = []
    for name, trajectory, row in results:
        if row is not None:
            cross_check.append(row)
        trajectories[name] = trajectory
        artifacts.append(str(write_frame(trajectory.to_frame(), out_dir / f"trajectory_{name}.csv")))
        sidecars = write_snapshots(trajectory.snapshots, trajectory.times, name, config.snapshot_every, out_dir)
        artifacts.extend(str(p) for p in sidecars)
        logging.info(f"[SimulateNode] '{name}': {len(trajectory)} snapshots, final mass {trajectory.total_mass[-1]:.12g}")
    if cross_check:
        table = pd.DataFrame(cross_check)
        logging.info(f"[SimulateNode] Largest superposition gap {table['gap'].max():.3g} at dt={config.solver.dt}")
        artifacts.append(str(write_frame(table, out_dir / "superposition_check.csv")))
    return {"trajectories": trajectories, "artifacts": artifacts}


def metrics_node(state: PipelineState) -> Dict[str, Any]:
    logging.info("[MetricsNode] Running...")
    config: ExperimentConfig = state["config"]
    grid = state["model"].grid
    out_dir = Path(state["output_dir"])
    artifacts = list(state.get("artifacts", []))
    try:
        for a, b in state["pairs"]:
            traj_a, traj_b = state["trajectories"][a], state["trajectories"][b]
            columns: Dict[str, List[float]] = {"t": traj_a.times.tolist()}
            for kind in config.metrics:
                values = []
                for snap_a, snap_b in zip(traj_a.snapshots, traj_b.snapshots):
                    try:
                        values.append(compute_metric(MetricKind(kind), snap_a, snap_b, grid))
                    except UnequalMass:
                        values.append(np.nan)
                if any(np.isnan(values)):
                    logging.warning(f"[MetricsNode] {MetricKind(kind).value} undefined for unequal masses in {a}/{b}")
                columns[MetricKind(kind).value] = values
            path = write_frame(pd.DataFrame(columns), out_dir / f"metrics_{_pair_label(a, b)}.csv")
            artifacts.append(str(path))
    except MTLabError as e:
        return _failure("MetricsNode", e)
    return {"artifacts": artifacts}


def stability_node(state: PipelineState) -> Dict[str, Any]:
    logging.info("[StabilityNode] Running...")
    config: ExperimentConfig = state["config"]
    model: ModelCoefficients = state["model"]
    out_dir = Path(state["output_dir"])
    if not model.p_is_zero:
        logging.warning("[StabilityNode] p is not zero; the stability estimates do not apply, skipping.")
        return {}

    artifacts = list(state.get("artifacts", []))
    violations = state.get("violations", 0)
    try:
        for a, b in state["pairs"]:
            traj_a, traj_b = state["trajectories"][a], state["trajectories"][b]
            constants = compute_global_constants(model, traj_a.snapshots[0], traj_b.snapshots[0])
            allowance = config.allowance_factor * config.solver.dt
            table = stability_table(traj_a, traj_b, constants, config.check_stride, allowance)
            nonlinear = check_nonlinear_estimate(traj_a, traj_b, constants, config.check_stride, allowance)
            pair_violations = int(table["violated"].sum()) + nonlinear.violations
            if pair_violations:
                logging.warning(f"[StabilityNode] {a}/{b}: {pair_violations} bound violations")
            violations += pair_violations
            label = _pair_label(a, b)
            artifacts.append(str(write_frame(table, out_dir / f"stability_{label}.csv")))
            artifacts.append(str(write_json(constants.to_dict(), out_dir / f"constants_{label}.json")))
    except MTLabError as e:
        return _failure("StabilityNode", e)
    return {"artifacts": artifacts, "violations": violations}


def report_node(state: PipelineState) -> Dict[str, Any]:
    logging.info("[ReportNode] Running...")
    error_message = state.get("error_message")
    if error_message:
        logging.error(f"[ReportNode] Pipeline stopped: {error_message}")
        return {"exit_code": state.get("exit_code") or EXIT_CONFIG_ERROR}
    violations = state.get("violations", 0)
    exit_code = EXIT_VIOLATION if violations else EXIT_OK
    for path in state.get("artifacts", []):
        logging.info(f"[ReportNode] Artifact: {path}")
    logging.info(f"[ReportNode] {violations} violation(s), exit code {exit_code}")
    return {"exit_code": exit_code}


def _next_or_report(next_node: str):
    def route(state: PipelineState) -> str:
        if state.get("error_message"):
            logging.info(f"[Router] Error recorded. Routing to: '{NODE_REPORT}'")
            return NODE_REPORT
        return next_node
    return route


def build_pipeline():
    logging.info("Creating LangGraph experiment pipeline...")
    workflow = StateGraph(PipelineState)

    workflow.add_node(NODE_VALIDATE, validate_node)
    workflow.add_node(NODE_SIMULATE, simulate_node)
    workflow.add_node(NODE_METRICS, metrics_node)
    workflow.add_node(NODE_STABILITY, stability_node)
    workflow.add_node(NODE_REPORT, report_node)

    workflow.set_entry_point(NODE_VALIDATE)

    chain = [NODE_VALIDATE, NODE_SIMULATE, NODE_METRICS, NODE_STABILITY]
    for node, next_node in zip(chain, chain[1:]):
        workflow.add_conditional_edges(
            node,
            _next_or_report(next_node),
            {next_node: next_node, NODE_REPORT: NODE_REPORT}
        )

    workflow.add_edge(NODE_STABILITY, NODE_REPORT)

    workflow.add_edge(NODE_REPORT, END)
    return workflow.compile()


pipeline_app = build_pipeline()
logging.info("LangGraph experiment pipeline compiled as 'pipeline_app'.")


def run(config: ExperimentConfig, output_dir: Optional[str] = None, workers: Optional[int] = None) -> int:
    out_dir = Path(output_dir or config.output_dir or get_settings().output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    initial: PipelineState = {
        "config": config,
        "output_dir": str(out_dir),
        "workers": resolve_workers(workers),
        "artifacts": [],
        "violations": 0,
        "error_message": None,
        "exit_code": None,
    }
    final_state = pipeline_app.invoke(initial)
    return int(final_state.get("exit_code", EXIT_CONFIG_ERROR))
