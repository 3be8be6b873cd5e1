"""Shared builders and brute-force oracles for the test suite.

Micro instances keep the exhaustive oracles cheap: stock bounds <= 3, horizon
<= 2, and at most three stochastic components (8 support points). The oracles
here deliberately avoid the vectorized sweep internals: policy enumeration
recurses over raw states and actions, and the allocation oracle enumerates
integer move vectors, so agreement with the production code is meaningful.
"""

import itertools
from typing import Dict, List, Optional, Tuple

import numpy as np

from drayage.alloc import (
    INFEASIBLE,
    AllocationProblem,
    build_problem,
    holding_cost,
    plan_caps_at,
    solve_allocation,
)
from drayage.dp import terminal_value
from drayage.model import (
    Bounds,
    CapacityPlan,
    CostSpec,
    Instance,
    Network,
    Scenario,
    Source,
    SystemState,
    UncertaintySpec,
    validate_instance,
)
from drayage.scenario import sample_scenarios


def _two_point(rng, lo, hi) -> Dict[int, float]:
    a, b = sorted(rng.choice(np.arange(lo, hi + 1), size=2, replace=False))
    p = round(float(rng.uniform(0.2, 0.8)), 2)
    return {int(a): p, int(b): round(1.0 - p, 2)}


def micro_instance(
    rng: np.random.Generator,
    n_entries: int = 1,
    n_exits: int = 1,
    horizon: int = 2,
    stock_bound: int = 3,
    action_max: int = 3,
) -> Instance:
    """Random tiny instance with at most 8 exogenous support points.

    Only the first entry's inflow, the first exit's outflow, and the spot
    rate are stochastic (two-point each); any further locations get constant
    flows so the support stays at 2^3.
    """
    entries = tuple(range(1, n_entries + 1))
    exits = tuple(range(n_entries + 1, n_entries + n_exits + 1))
    lanes = tuple((i, j) for i in entries for j in exits)

    inflow_dist = {}
    for k, i in enumerate(entries):
        if k == 0:
            inflow_dist[i] = _two_point(rng, 0, stock_bound)
        else:
            inflow_dist[i] = {int(rng.integers(0, stock_bound + 1)): 1.0}
    outflow_dist = {}
    for k, j in enumerate(exits):
        if k == 0:
            outflow_dist[j] = _two_point(rng, 0, stock_bound)
        else:
            outflow_dist[j] = {int(rng.integers(0, stock_bound + 1)): 1.0}

    exec_cost = {
        lane: tuple(round(float(rng.uniform(2, 20)), 2) for _ in range(horizon))
        for lane in lanes
    }
    strategic = Source(
        id=1,
        kind="strategic",
        lanes=lanes,
        execution_cost=exec_cost,
        reservation_rate=tuple(
            round(float(rng.uniform(0.5, 10)), 2) for _ in range(horizon)
        ),
    )
    spot = Source(
        id=2,
        kind="spot",
        lanes=lanes,
        execution_cost=None,
        reservation_rate=tuple(0.0 for _ in range(horizon)),
    )
    lo_rate = round(float(rng.uniform(2, 10)), 2)
    hi_rate = round(lo_rate + float(rng.uniform(1, 15)), 2)
    p = round(float(rng.uniform(0.2, 0.8)), 2)
    spot_dist = {lo_rate: p, hi_rate: round(1.0 - p, 2)}

    bounds = Bounds(
        entry_max={i: stock_bound for i in entries},
        exit_max={j: stock_bound for j in exits},
        exit_backorder_max={j: stock_bound for j in exits},
        action_max=action_max,
    )
    costs = CostSpec(
        entry_holding={i: round(float(rng.uniform(1, 8)), 1) for i in entries},
        exit_holding={j: round(float(rng.uniform(1, 8)), 1) for j in exits},
        exit_backorder={j: round(float(rng.uniform(4, 16)), 1) for j in exits},
        terminal_slopes=tuple(
            round(float(rng.uniform(1, 12)), 1)
            for _ in range(n_entries + 2 * n_exits)
        ),
    )
    initial = SystemState(
        entry_stock={i: int(rng.integers(0, stock_bound + 1)) for i in entries},
        exit_stock={
            j: int(rng.integers(-stock_bound, stock_bound + 1)) for j in exits
        },
    )
    instance = Instance(
        network=Network(entries=entries, exits=exits, lanes=lanes),
        sources=(strategic, spot),
        bounds=bounds,
        costs=costs,
        uncertainty=UncertaintySpec(
            inflow_dist=inflow_dist,
            outflow_dist=outflow_dist,
            spot_rate_dist={2: spot_dist},
        ),
        horizon=horizon,
        initial_state=initial,
    )
    assert validate_instance(instance) == []
    return instance


def micro_scenario(rng: np.random.Generator, instance: Instance) -> Scenario:
    return sample_scenarios(instance, 1, int(rng.integers(0, 2**31)))[0]


def relaxation_triple(
    rng: np.random.Generator,
) -> Tuple[Instance, Scenario, CapacityPlan]:
    """Instance/scenario/plan triple on which the LP bounds the DP provably.

    Stock bounds are widened until no reachable trajectory from the initial
    state can hit them (entries only fill by inflow, exits only by moves), so
    the clamped dynamics and the hard-bounded LP agree on the feasible set and
    -cost >= V1(initial) is a theorem rather than a tendency. Zero moves stay
    feasible for any capacity plan, so no infeasibility skips are needed.
    """
    horizon = int(rng.integers(2, 4))
    action_max = int(rng.integers(2, 5))
    inflow = _two_point(rng, 0, 3)
    outflow = _two_point(rng, 0, 3)
    e0 = int(rng.integers(0, 3))
    x0 = int(rng.integers(-2, 3))
    slack = int(rng.integers(0, 3))
    bounds = Bounds(
        entry_max={1: e0 + horizon * max(inflow) + slack},
        exit_max={2: max(x0, 0) + horizon * action_max + slack},
        exit_backorder_max={2: max(-x0, 0) + horizon * max(outflow) + slack},
        action_max=action_max,
    )
    lanes = ((1, 2),)
    exec_cost = {
        lanes[0]: tuple(round(float(rng.uniform(2, 20)), 2) for _ in range(horizon))
    }
    strategic = Source(1, "strategic", lanes, exec_cost,
                       tuple(round(float(rng.uniform(0.5, 10)), 2) for _ in range(horizon)))
    spot = Source(2, "spot", lanes, None, tuple(0.0 for _ in range(horizon)))
    lo = round(float(rng.uniform(2, 10)), 2)
    hi = round(lo + float(rng.uniform(1, 15)), 2)
    p = round(float(rng.uniform(0.2, 0.8)), 2)
    instance = Instance(
        network=Network(entries=(1,), exits=(2,), lanes=lanes),
        sources=(strategic, spot),
        bounds=bounds,
        costs=CostSpec(
            entry_holding={1: round(float(rng.uniform(1, 8)), 1)},
            exit_holding={2: round(float(rng.uniform(1, 8)), 1)},
            exit_backorder={2: round(float(rng.uniform(4, 16)), 1)},
            terminal_slopes=tuple(
                round(float(rng.uniform(1, 12)), 1) for _ in range(3)
            ),
        ),
        uncertainty=UncertaintySpec(
            inflow_dist={1: inflow},
            outflow_dist={2: outflow},
            spot_rate_dist={2: {lo: p, hi: round(1.0 - p, 2)}},
        ),
        horizon=horizon,
        initial_state=SystemState({1: e0}, {2: x0}),
    )
    assert validate_instance(instance) == []
    scenario = micro_scenario(rng, instance)
    plan = random_plan(rng, instance)
    return instance, scenario, plan


def random_plan(rng: np.random.Generator, instance: Instance) -> CapacityPlan:
    amax = instance.bounds.action_max
    return CapacityPlan(
        capacity={
            s.id: tuple(int(rng.integers(0, amax + 1)) for _ in range(instance.horizon))
            for s in instance.sources
        }
    )


# ---------------------------------------------------------------------------
# Oracles


def all_states(instance: Instance) -> List[SystemState]:
    """Every grid point: entries in [0, max], exits in [-backorder, max]."""
    axes = []
    for i in instance.network.entries:
        axes.append([(0, i, v) for v in range(instance.bounds.entry_max[i] + 1)])
    for j in instance.network.exits:
        lo = -instance.bounds.exit_backorder_max[j]
        hi = instance.bounds.exit_max[j]
        axes.append([(1, j, v) for v in range(lo, hi + 1)])
    states = []
    for combo in itertools.product(*axes):
        entry = {loc: v for kind, loc, v in combo if kind == 0}
        exit_ = {loc: v for kind, loc, v in combo if kind == 1}
        states.append(SystemState(entry, exit_))
    return states


def enumerate_policy_value(
    instance: Instance,
    scenario: Scenario,
    plan: CapacityPlan,
    state: SystemState,
    period: int = 1,
    gamma: float = 1.0,
) -> float:
    """Exhaustive action-sequence recursion, independent of the dp sweep."""
    from drayage.alloc import immediate_cost, transition

    if period > instance.horizon:
        return terminal_value(state, instance.costs)
    z = scenario.realizations[period - 1]
    caps = plan_caps_at(plan, period)
    best = -np.inf
    for a in range(instance.bounds.action_max + 1):
        alloc = solve_allocation(build_problem(state, a, z, caps, instance, period))
        if alloc is INFEASIBLE:
            continue
        cost = holding_cost(state, instance.costs) + alloc.cost
        nxt = transition(state, alloc.lane_totals(), z, instance.bounds)
        v = -cost + gamma * enumerate_policy_value(
            instance, scenario, plan, nxt, period + 1, gamma
        )
        if v > best:
            best = v
    return best


def brute_force_allocation(problem: AllocationProblem) -> Optional[float]:
    """Minimum cost over all integer move vectors, or None when infeasible."""
    keys = sorted(problem.lane_costs.keys())
    total = int(round(problem.total_volume))
    if any(v < -1e-9 for v in problem.entry_available.values()):
        return None
    if any(v < -1e-9 for v in problem.exit_space.values()):
        return None
    ranges = []
    for sid, lane in keys:
        hi = int(min(problem.source_caps[sid], total))
        ranges.append(range(hi + 1))
    best = None
    for combo in itertools.product(*ranges):
        if sum(combo) != total:
            continue
        by_source: Dict[int, int] = {}
        by_entry: Dict[int, int] = {}
        by_exit: Dict[int, int] = {}
        for (sid, lane), m in zip(keys, combo):
            by_source[sid] = by_source.get(sid, 0) + m
            by_entry[lane[0]] = by_entry.get(lane[0], 0) + m
            by_exit[lane[1]] = by_exit.get(lane[1], 0) + m
        if any(v > problem.source_caps[s] + 1e-9 for s, v in by_source.items()):
            continue
        if any(
            by_entry.get(i, 0) > avail + 1e-9
            for i, avail in problem.entry_available.items()
        ):
            continue
        if any(
            by_exit.get(j, 0) > space + 1e-9
            for j, space in problem.exit_space.items()
        ):
            continue
        cost = sum(problem.lane_costs[k] * m for k, m in zip(keys, combo))
        if best is None or cost < best:
            best = cost
    return best
