"""Per-period immediate-cost allocation and state transition.

The allocation problem distributes a total move volume A_t across (source,
lane) pairs at minimal cost subject to: total volume matches A_t, per-source
capacity, per-entry availability (current stock plus inflow), per-exit space
(storage bound minus current stock), and nonnegativity. Infeasibility is a
signal: the action A_t is excluded from the feasible action set rather than
penalized.

The state transition applies the per-lane move totals and the realized
inflows/outflows, clamping to the stock bounds. Excess inflow above an entry
bound is lost without penalty; this closes a gap the underlying model leaves
open and is a deliberate design decision.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .lp import solve_lp
from .model import (
    Bounds,
    CapacityPlan,
    CostSpec,
    ExogenousRealization,
    Instance,
    Lane,
    SPOT,
    SystemState,
)


class Infeasible:
    """Marker: no allocation satisfies the constraints at this action."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "Infeasible"


INFEASIBLE = Infeasible()


@dataclass(frozen=True)
class AllocationProblem:
    total_volume: float
    lane_costs: Dict[Tuple[int, Lane], float]  # (source id, lane) -> $/TEU
    source_caps: Dict[int, float]
    entry_available: Dict[int, float]
    exit_space: Dict[int, float]


@dataclass(frozen=True)
class Allocation:
    moves: Dict[Tuple[int, Lane], float]
    cost: float

    def lane_totals(self) -> Dict[Lane, float]:
        out: Dict[Lane, float] = {}
        for (_, lane), m in self.moves.items():
            out[lane] = out.get(lane, 0.0) + m
        return out


def holding_cost(state: SystemState, costs: CostSpec) -> float:
    """sum_i CW_i*S_i + sum_j (CD_j*max(S_j,0) + CB_j*(-min(S_j,0)))."""
    total = 0.0
    for i, s in state.entry_stock.items():
        total += costs.entry_holding[i] * s
    for j, s in state.exit_stock.items():
        if s >= 0:
            total += costs.exit_holding[j] * s
        else:
            total += costs.exit_backorder[j] * (-s)
    return total


def split_volume(
    total: float, caps: List[float], rates: List[float]
) -> Optional[Tuple[float, List[float]]]:
    """Cheapest-first split of a volume across sources sharing one lane.

    Returns (cost, per-source moves) or None when total exceeds the summed
    caps. Rate ties break toward the earlier source, matching the sorted
    variable order the simplex would use.
    """
    if total > sum(caps) + 1e-9:
        return None
    order = sorted(range(len(caps)), key=lambda k: (rates[k], k))
    left = total
    moves = [0.0] * len(caps)
    cost = 0.0
    for k in order:
        take = min(left, caps[k])
        moves[k] = take
        cost += take * rates[k]
        left -= take
        if left <= 1e-12:
            break
    return cost, moves


def solve_allocation(problem: AllocationProblem):
    """Cost-minimal feasible allocation, or INFEASIBLE.

    Single-lane problems use a closed-form greedy fill; general problems go
    through the bounded-variable simplex.
    """
    A = float(problem.total_volume)
    keys = sorted(problem.lane_costs.keys())
    if A <= 1e-12:
        feasible = all(v >= 0 for v in problem.entry_available.values()) and all(
            v >= 0 for v in problem.exit_space.values()
        )
        if not feasible:
            return INFEASIBLE
        return Allocation({k: 0.0 for k in keys}, 0.0)

    lanes = {lane for (_, lane) in keys}
    if len(lanes) == 1:
        (lane,) = lanes
        i, j = lane
        if A > problem.entry_available.get(i, 0.0) + 1e-9:
            return INFEASIBLE
        if A > problem.exit_space.get(j, 0.0) + 1e-9:
            return INFEASIBLE
        caps = [problem.source_caps[k] for (k, _) in keys]
        rates = [problem.lane_costs[key] for key in keys]
        split = split_volume(A, caps, rates)
        if split is None:
            return INFEASIBLE
        cost, moves = split
        return Allocation({key: m for key, m in zip(keys, moves)}, cost)

    # General case: one variable per (source, lane).
    n = len(keys)
    c = np.array([problem.lane_costs[k] for k in keys])
    A_eq = np.ones((1, n))
    b_eq = np.array([A])
    rows = []
    rhs = []
    for sid, cap in sorted(problem.source_caps.items()):
        row = np.array([1.0 if k == sid else 0.0 for (k, _) in keys])
        if row.any():
            rows.append(row)
            rhs.append(cap)
    for i, avail in sorted(problem.entry_available.items()):
        row = np.array([1.0 if lane[0] == i else 0.0 for (_, lane) in keys])
        if row.any():
            rows.append(row)
            rhs.append(avail)
    for j, space in sorted(problem.exit_space.items()):
        row = np.array([1.0 if lane[1] == j else 0.0 for (_, lane) in keys])
        if row.any():
            rows.append(row)
            rhs.append(space)
    res = solve_lp(c, A_eq=A_eq, b_eq=b_eq, A_ub=np.array(rows), b_ub=np.array(rhs))
    if res.status != "optimal":
        return INFEASIBLE
    return Allocation({k: float(x) for k, x in zip(keys, res.x)}, float(res.objective))


def build_problem(
    state: SystemState,
    action: float,
    realization: ExogenousRealization,
    caps: Dict[int, float],
    instance: Instance,
    period: int = 1,
) -> AllocationProblem:
    """Assemble the allocation problem for one period (1-based)."""
    lane_costs: Dict[Tuple[int, Lane], float] = {}
    for s in instance.sources:
        for lane in s.lanes:
            if s.kind == SPOT:
                lane_costs[(s.id, lane)] = realization.spot_rates[s.id][lane]
            else:
                lane_costs[(s.id, lane)] = s.execution_cost[lane][period - 1]
    avail = {
        i: state.entry_stock[i] + realization.inflow[i] for i in instance.network.entries
    }
    space = {
        j: instance.bounds.exit_max[j] - state.exit_stock[j]
        for j in instance.network.exits
    }
    return AllocationProblem(
        total_volume=action,
        lane_costs=lane_costs,
        source_caps={k: float(v) for k, v in caps.items()},
        entry_available=avail,
        exit_space=space,
    )


def immediate_cost(
    state: SystemState,
    action: float,
    realization: ExogenousRealization,
    caps: Dict[int, float],
    instance: Instance,
    period: int = 1,
):
    """holding_cost(state) + minimal transport cost, or INFEASIBLE."""
    alloc = solve_allocation(build_problem(state, action, realization, caps, instance, period))
    if alloc is INFEASIBLE:
        return INFEASIBLE
    return holding_cost(state, instance.costs) + alloc.cost


def transition(
    state: SystemState,
    lane_totals: Dict[Lane, float],
    realization: ExogenousRealization,
    bounds: Bounds,
) -> SystemState:
    """Apply moves and flows, clamping each stock into its bounds."""
    out_by_entry: Dict[int, float] = {}
    in_by_exit: Dict[int, float] = {}
    for (i, j), m in lane_totals.items():
        out_by_entry[i] = out_by_entry.get(i, 0.0) + m
        in_by_exit[j] = in_by_exit.get(j, 0.0) + m
    entry = {}
    for i, s in state.entry_stock.items():
        raw = s - out_by_entry.get(i, 0.0) + realization.inflow[i]
        entry[i] = int(round(min(max(raw, 0.0), bounds.entry_max[i])))
    exit_ = {}
    for j, s in state.exit_stock.items():
        raw = s + in_by_exit.get(j, 0.0) - realization.outflow[j]
        lo, hi = -bounds.exit_backorder_max[j], bounds.exit_max[j]
        exit_[j] = int(round(min(max(raw, lo), hi)))
    return SystemState(entry, exit_)


def plan_caps_at(plan: CapacityPlan, period: int) -> Dict[int, float]:
    """Per-source capacity column for a 1-based period."""
    return {k: v[period - 1] for k, v in plan.capacity.items()}
