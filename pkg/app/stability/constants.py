# app/stability/constants.py

"""
Explicit constants of the stability estimates.

Everything here is computed a priori from the coefficient tables, the grid
and the two initial measures; no trajectory is needed.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict

from app.core.errors import DenominatorNonpositive, NonPositiveSpeed, OutOfRange
from app.core.measure import DiscreteMeasure, Interval, restrict
from app.metrics.grid import BreakpointGrid


def compute_Tmax(grid: BreakpointGrid, model) -> float:
    return grid.min_gap / model.sup_g1


def compute_min_g1(model, tv_bound: float) -> float:
    # Mass is conserved for p = 0, so v stays in [0, TV(mu_1(0)) + TV(mu_2(0))]
    value = model.g1.inf_on(0.0, max(0.0, tv_bound))
    if value <= 0:
        raise NonPositiveSpeed(f"g1 reaches {value} on [0, {tv_bound}]")
    return value


def _tail_mass(grid: BreakpointGrid, reach: float, *measures: DiscreteMeasure) -> float:
    # Mass of the open window (x_N - reach, x_N) that can reach x_N before the horizon
    if reach <= 0:
        return 0.0
    window = Interval.open(grid.last - reach, grid.last)
    return sum(restrict(m, window).total_mass for m in measures)


def _local_factors(model, min_g1: float) -> Dict[str, float]:
    sup_c, lip_c, lip_g1 = model.sup_c, model.lip_c, model.lip_g1
    return {
        "base": lip_g1 + 2.0 * sup_c * lip_g1 / min_g1 + 2.0 * lip_c,
        "growth": sup_c * (sup_c * lip_g1 / min_g1 + lip_c + lip_g1),
    }


def local_denominator(T: float, model, mu1_0: DiscreteMeasure, mu2_0: DiscreteMeasure, min_g1: float) -> float:
    reach = model.sup_g1 * T
    return 1.0 - model.lip_g1 / min_g1 * _tail_mass(model.grid, reach, mu1_0, mu2_0)


def compute_C1(T: float, model, mu1_0: DiscreteMeasure, mu2_0: DiscreteMeasure) -> float:
    if not T > 0:
        raise OutOfRange(f"the local estimate needs T > 0, got {T}")
    tv1, tv2 = mu1_0.total_mass, mu2_0.total_mass
    min_g1 = compute_min_g1(model, tv1 + tv2)
    sup_c = model.sup_c

    denominator = local_denominator(T, model, mu1_0, mu2_0, min_g1)
    if denominator <= 0:
        raise DenominatorNonpositive(f"1 - Lip(g1)/min(g1) * mass(J_max) = {denominator} at T={T}")

    factors = _local_factors(model, min_g1)
    leading = max(1.0, sup_c / min_g1 * (2.0 + T * sup_c))
    # Either measure may play the role of the second solution, so take the larger mass
    coupling = (factors["base"] + T * factors["growth"]) * max(tv1, tv2) * max(1.0 / min_g1, T)
    return leading + coupling / denominator


def nonlinear_bound(T: float, model, mu1_0: DiscreteMeasure, mu2_0: DiscreteMeasure, rho0: float) -> float:
    """Right side of the local estimate on the integral of |v_1 - v_2| over [0, T]."""
    min_g1 = compute_min_g1(model, mu1_0.total_mass + mu2_0.total_mass)
    denominator = local_denominator(T, model, mu1_0, mu2_0, min_g1)
    if denominator <= 0:
        raise DenominatorNonpositive(f"1 - Lip(g1)/min(g1) * mass(J_max) = {denominator} at T={T}")
    return max(1.0 / min_g1, T) / denominator * rho0


@dataclass(frozen=True)
class StabilityConstants:
    T_max: float
    T_int: float
    T_intmin: float
    L: float
    It1: int
    It2: int
    kappa: float
    alpha: float
    beta: float
    min_g1: float
    sup_g1: float
    sup_c: float
    Lip_g1: float
    Lip_c: float
    tv1: float
    tv2: float
    step_length: float
    fixed_step: bool
    model: object = field(repr=False, compare=False, default=None)
    mu1_0: object = field(repr=False, compare=False, default=None)
    mu2_0: object = field(repr=False, compare=False, default=None)

    def C1_of_T(self, T: float) -> float:
        return compute_C1(T, self.model, self.mu1_0, self.mu2_0)

    def global_bound(self, t: float, rho0: float) -> float:
        exponent = self.alpha * math.ceil(t / self.beta - 1e-12)
        if exponent > 700:
            return math.inf if rho0 > 0 else 0.0
        return math.exp(exponent) * rho0

    def v_integral_bound(self, rho0: float) -> float:
        """Long-horizon bound on the integral of |v_1 - v_2|."""
        return 2.0 * max(1.0 / self.min_g1, self.T_int) * self.It1 * self.kappa ** self.It2 * rho0

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        for key in ("model", "mu1_0", "mu2_0"):
            data.pop(key)
        # JSON has no infinity
        if math.isinf(self.L):
            data["L"] = "inf"
        return data


def compute_global_constants(model, mu1_0: DiscreteMeasure, mu2_0: DiscreteMeasure) -> StabilityConstants:
    grid = model.grid
    tv1, tv2 = mu1_0.total_mass, mu2_0.total_mass
    min_g1 = compute_min_g1(model, tv1 + tv2)
    sup_g1, sup_c, lip_g1, lip_c = model.sup_g1, model.sup_c, model.lip_g1, model.lip_c

    T_max = compute_Tmax(grid, model)
    last_gap = grid.last - float(grid.points[-2])
    T_int = last_gap / sup_g1
    T_intmin = last_gap / min_g1
    step_length = min(1.0, T_max)

    fixed_step = lip_g1 == 0
    if fixed_step:
        logging.warning("Lip(g1) = 0: mass steps are unbounded (L = inf), using fixed steps min(1, T_max)")
        L = math.inf
    else:
        L = 0.25 * min_g1 / lip_g1

    def mass_steps(mass: float) -> int:
        return 0 if math.isinf(L) else math.ceil(mass / L)

    last_cell = Interval.open(float(grid.points[-2]), grid.last)
    cell_mass = restrict(mu1_0, last_cell).total_mass + restrict(mu2_0, last_cell).total_mass
    time_steps = math.ceil(T_intmin / step_length - 1e-12)
    It1 = time_steps + mass_steps(cell_mass) + 1
    It2 = time_steps + mass_steps(tv1 + tv2) + 2

    factors = _local_factors(model, min_g1)
    kappa = (max(1.0, sup_c / min_g1 * (2.0 + sup_c))
             + 2.0 * (factors["base"] + factors["growth"]) * max(tv1, tv2) * max(1.0 / min_g1, 1.0))

    constants = StabilityConstants(
        T_max=T_max, T_int=T_int, T_intmin=T_intmin, L=L, It1=It1, It2=It2,
        kappa=kappa, alpha=It2 * math.log(kappa), beta=T_int,
        min_g1=min_g1, sup_g1=sup_g1, sup_c=sup_c, Lip_g1=lip_g1, Lip_c=lip_c,
        tv1=tv1, tv2=tv2, step_length=step_length, fixed_step=fixed_step,
        model=model, mu1_0=mu1_0, mu2_0=mu2_0,
    )
    logging.info(f"Stability constants: kappa={kappa:.6g}, It1={It1}, It2={It2}, T_int={T_int:.6g}, T_max={T_max:.6g}")
    return constants
