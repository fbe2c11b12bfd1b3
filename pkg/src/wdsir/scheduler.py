"""Single-slot pump scheduling by exhaustive status enumeration."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .errors import OpsInfeasibleError, ParameterError, StructuralInfeasibility
from .hydraulics import HydraulicState, check_feasibility, default_sign_pattern, solve_tree_flows
from .network import GRAVITY, Network

WATER_DENSITY = 1000.0  # kg/m^3


@dataclass(frozen=True)
class OpsSolution:
    pump_status: dict  # pump id -> bool
    sign_pattern: tuple[int, ...]
    nominal_state: HydraulicState
    energy_cost: float
    evaluated: int = 0  # status combinations examined


def pump_energy_cost(flow_m3s, gain_m, efficiency=0.75, tariff=1.0, duration_s=1.0, gravity=GRAVITY) -> float:
    """Energy bill for one pump over a slot: tariff * rho g q H / eta * duration."""
    if not (0.0 < efficiency <= 1.0):
        raise ParameterError(f"efficiency must lie in (0, 1], got {efficiency}")
    if flow_m3s < 0 or gain_m < 0:
        raise ParameterError("pump flow and gain must be nonnegative")
    return tariff * WATER_DENSITY * gravity * flow_m3s * gain_m / efficiency * duration_s


def _cost(net, state, efficiency, tariff, duration_s):
    total = 0.0
    for e in net.pumps:
        if not state.pump_status[e.id]:
            continue
        q = max(state.flows[net.edge_index[e.id]], 0.0)
        total += pump_energy_cost(q, max(state.pump_gains[e.id], 0.0), efficiency, tariff,
                                  duration_s, net.gravity)
    return total


def solve_ops(net: Network, forecast_demands=None, *, efficiency=0.75, tariff=1.0,
              duration_s=3600.0) -> OpsSolution:
    """Cheapest feasible pump status at the forecast demands.

    Every on/off combination is tried. Ties go to fewer pumps on, then to
    the lexicographically smallest status tuple (off < on). Free pump gains
    in the nominal state are the smallest that keep every head admissible.
    """
    pumps = net.pumps
    best_key, best = None, None
    least = (math.inf, None, "")
    count = 0
    for combo in itertools.product((False, True), repeat=len(pumps)):
        count += 1
        status = {p.id: on for p, on in zip(pumps, combo)}
        try:
            flows = solve_tree_flows(net, forecast_demands, status).flows
        except StructuralInfeasibility as exc:
            if least[1] is None:
                least = (math.inf, status, str(exc))
            continue
        sign = default_sign_pattern(net, flows, status)
        verdict = check_feasibility(net, forecast_demands, status, sign, witness=True)
        if not verdict.feasible:
            if verdict.worst_residual < least[0]:
                least = (verdict.worst_residual, status, verdict.worst_constraint)
            continue
        cost = _cost(net, verdict.state, efficiency, tariff, duration_s)
        key = (cost, sum(combo), combo)
        if best_key is None or key < best_key:
            best_key = key
            best = OpsSolution(status, sign, verdict.state, cost)
    if best is None:
        residual, status, what = least
        raise OpsInfeasibleError(
            f"no feasible pump status; least violated {status} ({what})", status,
            None if math.isinf(residual) else residual)
    return OpsSolution(best.pump_status, best.sign_pattern, best.nominal_state, best.energy_cost, count)
