"""Backward-induction dynamic programming over the integer state grid.

Values follow the sign convention V = negative cumulative cost (bigger is
better); solvers therefore maximize. Three entry points share one sweep:

  solve_scenario   one fixed realization per period (perfect information)
  solve_expected   weighted realizations per period (exact expectation when
                   the SampleSet enumerates the support, SAA otherwise)
  evaluate_policy  same sweep with the action forced by a fixed policy

Single-entry single-exit instances take a vectorized path: per period the
transport cost depends only on (action, realization), so the Bellman update
is a handful of numpy gathers over the (entry, exit) grid. Everything else
falls back to a per-state loop with memoized allocation solves.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .alloc import (
    INFEASIBLE,
    build_problem,
    holding_cost,
    plan_caps_at,
    solve_allocation,
    split_volume,
    transition,
)
from .model import (
    STRATEGIC,
    CapacityPlan,
    CostSpec,
    ExogenousRealization,
    Instance,
    Scenario,
    SystemState,
)
from .scenario import SampleSet, realization_key


class UndefinedPolicyState(Exception):
    """A rollout reached a (period, state) the policy cannot act on."""


# ---------------------------------------------------------------------------
# State grid indexing


@dataclass(frozen=True)
class StateIndexer:
    """Mixed-radix flattening of the state grid, entries first then exits.

    Exit coordinates are offset by the backorder bound so indices start at 0.
    """

    entry_ids: Tuple[int, ...]
    exit_ids: Tuple[int, ...]
    entry_sizes: Tuple[int, ...]
    exit_sizes: Tuple[int, ...]
    exit_offsets: Tuple[int, ...]

    @staticmethod
    def for_instance(instance: Instance) -> "StateIndexer":
        b = instance.bounds
        entries = instance.network.entries
        exits = instance.network.exits
        return StateIndexer(
            entry_ids=entries,
            exit_ids=exits,
            entry_sizes=tuple(b.entry_max[i] + 1 for i in entries),
            exit_sizes=tuple(
                b.exit_backorder_max[j] + b.exit_max[j] + 1 for j in exits
            ),
            exit_offsets=tuple(b.exit_backorder_max[j] for j in exits),
        )

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.entry_sizes + self.exit_sizes

    @property
    def n_states(self) -> int:
        n = 1
        for s in self.shape:
            n *= s
        return n

    def index_of(self, state: SystemState) -> int:
        digits = [state.entry_stock[i] for i in self.entry_ids]
        digits += [
            state.exit_stock[j] + off
            for j, off in zip(self.exit_ids, self.exit_offsets)
        ]
        idx = 0
        for d, size in zip(digits, self.shape):
            if d < 0 or d >= size:
                raise ValueError(f"state outside grid: {state}")
            idx = idx * size + d
        return idx

    def state_of(self, index: int) -> SystemState:
        digits = []
        for size in reversed(self.shape):
            digits.append(index % size)
            index //= size
        digits.reverse()
        ne = len(self.entry_ids)
        return SystemState(
            entry_stock={i: digits[k] for k, i in enumerate(self.entry_ids)},
            exit_stock={
                j: digits[ne + k] - self.exit_offsets[k]
                for k, j in enumerate(self.exit_ids)
            },
        )

    def all_states(self) -> List[SystemState]:
        return [self.state_of(i) for i in range(self.n_states)]


# ---------------------------------------------------------------------------
# Tables and trajectories


@dataclass
class ValueTable:
    """Dense values per period; row t-1 holds period t, last row is terminal."""

    horizon: int
    indexer: StateIndexer
    values: np.ndarray  # shape (horizon + 1, n_states)

    def value(self, period: int, state: SystemState) -> float:
        if not 1 <= period <= self.horizon + 1:
            raise ValueError(f"period {period} outside 1..{self.horizon + 1}")
        return float(self.values[period - 1, self.indexer.index_of(state)])

    def best_initial_state(self) -> Tuple[SystemState, float]:
        """Argmax of V_1 over the grid (ties: lowest state index)."""
        i = int(np.argmax(self.values[0]))
        return self.indexer.state_of(i), float(self.values[0, i])

    def to_csv(self, path: str) -> None:
        _table_to_csv(path, self, self.values, "value", range(1, self.horizon + 2))


@dataclass
class PolicyTable:
    horizon: int
    indexer: StateIndexer
    actions: np.ndarray  # shape (horizon, n_states), int

    def action(self, period: int, state: SystemState) -> int:
        if not 1 <= period <= self.horizon:
            raise UndefinedPolicyState(f"no policy for period {period}")
        return int(self.actions[period - 1, self.indexer.index_of(state)])

    def to_csv(self, path: str) -> None:
        _table_to_csv(path, self, self.actions, "action", range(1, self.horizon + 1))


def _state_columns(indexer: StateIndexer, idx: int) -> Tuple[str, str]:
    st = indexer.state_of(idx)
    entry = "|".join(str(st.entry_stock[i]) for i in indexer.entry_ids)
    exit_ = "|".join(str(st.exit_stock[j]) for j in indexer.exit_ids)
    return entry, exit_


def _table_to_csv(path, table, data, value_name, periods) -> None:
    # multi-location stocks are |-joined inside the entry/exit columns
    with open(path, "w") as f:
        f.write(f"t,entry,exit,{value_name}\n")
        cast = int if np.issubdtype(data.dtype, np.integer) else float
        for row, t in enumerate(periods):
            for idx in range(table.indexer.n_states):
                entry, exit_ = _state_columns(table.indexer, idx)
                f.write(f"{t},{entry},{exit_},{cast(data[row, idx])!r}\n")


@dataclass(frozen=True)
class TrajectoryStep:
    period: int
    state: SystemState
    action: int
    lane_totals: Dict
    immediate_cost: float
    next_state: SystemState


@dataclass(frozen=True)
class Trajectory:
    steps: Tuple[TrajectoryStep, ...]
    total_cost: float

    def to_csv(self, path: str) -> None:
        with open(path, "w") as f:
            f.write("t,entry,exit,action,immediate_cost,next_entry,next_exit\n")
            for s in self.steps:
                e = "|".join(str(v) for _, v in sorted(s.state.entry_stock.items()))
                x = "|".join(str(v) for _, v in sorted(s.state.exit_stock.items()))
                ne = "|".join(
                    str(v) for _, v in sorted(s.next_state.entry_stock.items())
                )
                nx = "|".join(
                    str(v) for _, v in sorted(s.next_state.exit_stock.items())
                )
                f.write(
                    f"{s.period},{e},{x},{s.action},"
                    f"{float(s.immediate_cost)!r},{ne},{nx}\n"
                )


# ---------------------------------------------------------------------------
# Stage primitives


def terminal_value(state: SystemState, costs: CostSpec) -> float:
    """-alpha . (entry stocks, exit positive parts, exit negative parts).

    Slope order: sorted entry ids, then sorted exit ids twice (positive then
    negative parts), matching CostSpec.terminal_slopes.
    """
    parts: List[float] = []
    for _, v in sorted(state.entry_stock.items()):
        parts.append(float(v))
    exits = sorted(state.exit_stock.items())
    for _, v in exits:
        parts.append(float(max(v, 0)))
    for _, v in exits:
        parts.append(float(-min(v, 0)))
    slopes = costs.terminal_slopes
    if len(slopes) != len(parts):
        raise ValueError("terminal slope vector does not match state dimension")
    return -float(np.dot(slopes, parts))


def _max_feasible_action(state, realization, caps, instance) -> int:
    """Largest feasible total volume; the feasible set is {0..result}.

    Scaling any feasible flow down stays feasible, so feasibility is monotone
    in the total and one upward scan suffices.
    """
    best = 0
    for a in range(1, instance.bounds.action_max + 1):
        prob = build_problem(state, a, realization, caps, instance)
        if solve_allocation(prob) is INFEASIBLE:
            break
        best = a
    return best


def feasible_actions(
    state: SystemState,
    realization: ExogenousRealization,
    caps: Dict[int, float],
    instance: Instance,
) -> List[int]:
    """Ordered action set {0..A*} under the allocation LP at this state."""
    return list(range(_max_feasible_action(state, realization, caps, instance) + 1))


# ---------------------------------------------------------------------------
# The backward sweep

PeriodData = List[Tuple[ExogenousRealization, float]]  # (realization, weight)


def _collapse(data: PeriodData, instance: Instance) -> PeriodData:
    # duplicate draws fold into multiplicity weights; identical Bellman sums
    merged: Dict[Tuple, List] = {}
    order: List[Tuple] = []
    for z, w in data:
        k = realization_key(z, instance)
        if k not in merged:
            merged[k] = [z, 0.0]
            order.append(k)
        merged[k][1] += w
    return [(merged[k][0], merged[k][1]) for k in order]


def _terminal_row(instance: Instance, indexer: StateIndexer) -> np.ndarray:
    row = np.empty(indexer.n_states)
    for i in range(indexer.n_states):
        row[i] = terminal_value(indexer.state_of(i), instance.costs)
    return row


def _single_lane_ids(instance: Instance):
    if len(instance.network.entries) == 1 and len(instance.network.exits) == 1:
        return instance.network.entries[0], instance.network.exits[0]
    return None


def _lane_cost_table(
    instance: Instance, z: ExogenousRealization, caps: Dict[int, float], period: int
) -> np.ndarray:
    """Transport cost per action for the single-lane case; inf = beyond caps."""
    lane = instance.network.lanes[0]
    ids, cap_list, rate_list = [], [], []
    for s in instance.sources:
        if lane not in s.lanes:
            continue
        ids.append(s.id)
        cap_list.append(float(caps.get(s.id, 0.0)))
        if s.kind == STRATEGIC:
            rate_list.append(float(s.execution_cost[lane][period - 1]))
        else:
            rate_list.append(float(z.spot_rates[s.id][lane]))
    amax = instance.bounds.action_max
    out = np.full(amax + 1, np.inf)
    for a in range(amax + 1):
        res = split_volume(float(a), cap_list, rate_list)
        if res is None:
            break
        out[a] = res[0]
    return out


def _sweep_fast(
    instance: Instance, per_period: List[PeriodData], plan: CapacityPlan, gamma: float
) -> Tuple[ValueTable, PolicyTable]:
    """Vectorized Bellman sweep for one entry, one exit, one lane."""
    i, j = _single_lane_ids(instance)
    b = instance.bounds
    ne, ns = b.entry_max[i] + 1, b.exit_backorder_max[j] + b.exit_max[j] + 1
    amax = b.action_max
    indexer = StateIndexer.for_instance(instance)
    tau = instance.horizon

    e_grid = np.arange(ne)
    s_grid = np.arange(ns) - b.exit_backorder_max[j]
    hold = (
        instance.costs.entry_holding[i] * e_grid[:, None]
        + instance.costs.exit_holding[j] * np.maximum(s_grid, 0)[None, :]
        + instance.costs.exit_backorder[j] * np.maximum(-s_grid, 0)[None, :]
    ).astype(float)
    space = b.exit_max[j] - s_grid  # pre-outflow exit space, z-independent

    values = np.empty((tau + 1, ne * ns))
    values[tau] = _terminal_row(instance, indexer)
    actions = np.zeros((tau, ne * ns), dtype=int)

    for t in range(tau, 0, -1):
        caps = plan_caps_at(plan, t)
        data = _collapse(per_period[t - 1], instance)
        vnext = values[t].reshape(ne, ns)
        acc = np.zeros((amax + 1, ne, ns))
        cap_total = np.inf
        q_min = np.inf
        for z, w in data:
            cost = _lane_cost_table(instance, z, caps, t)
            cap_total = min(cap_total, float(np.sum(np.isfinite(cost)) - 1))
            q_min = min(q_min, z.inflow[i])
            d = z.outflow[j]
            for a in range(amax + 1):
                e_next = np.clip(e_grid - a + z.inflow[i], 0, ne - 1)
                s_next = np.clip(
                    s_grid + a - d, -b.exit_backorder_max[j], b.exit_max[j]
                ) + b.exit_backorder_max[j]
                c = cost[a] if np.isfinite(cost[a]) else 0.0
                acc[a] += w * (-c + gamma * vnext[np.ix_(e_next, s_next)])
        # feasible iff a <= min over z of (entry avail, caps) and exit space
        a_cap = np.minimum(
            np.minimum(e_grid[:, None] + q_min, space[None, :]), cap_total
        )
        a_range = np.arange(amax + 1)[:, None, None]
        acc = np.where(a_range <= a_cap[None, :, :], acc, -np.inf)
        best = np.argmax(acc, axis=0)  # first max = smallest action
        values[t - 1] = (-hold + np.take_along_axis(acc, best[None], 0)[0]).ravel()
        actions[t - 1] = best.ravel()

    return (
        ValueTable(tau, indexer, values),
        PolicyTable(tau, indexer, actions),
    )


def _sweep_generic(
    instance: Instance, per_period: List[PeriodData], plan: CapacityPlan, gamma: float
) -> Tuple[ValueTable, PolicyTable]:
    indexer = StateIndexer.for_instance(instance)
    tau = instance.horizon
    n = indexer.n_states
    states = indexer.all_states()
    values = np.empty((tau + 1, n))
    values[tau] = _terminal_row(instance, indexer)
    actions = np.zeros((tau, n), dtype=int)
    amax = instance.bounds.action_max

    for t in range(tau, 0, -1):
        caps = plan_caps_at(plan, t)
        data = _collapse(per_period[t - 1], instance)
        memo: Dict[Tuple, Optional[Tuple[float, int]]] = {}

        def stage(state, a, z):
            """(transport cost, next-state index) or None if infeasible."""
            avail = tuple(
                state.entry_stock[i] + z.inflow[i] for i in indexer.entry_ids
            )
            sp = tuple(
                instance.bounds.exit_max[j] - state.exit_stock[j]
                for j in indexer.exit_ids
            )
            key = (a, avail, sp, realization_key(z, instance))
            if key in memo:
                hit = memo[key]
                if hit is None:
                    return None
                # next state still depends on the concrete stocks
                cost, totals = hit
            else:
                prob = build_problem(state, a, z, caps, instance, period=t)
                sol = solve_allocation(prob)
                if sol is INFEASIBLE:
                    memo[key] = None
                    return None
                cost, totals = sol.cost, sol.lane_totals()
                memo[key] = (cost, totals)
            nxt = transition(state, totals, z, instance.bounds)
            return cost, indexer.index_of(nxt)

        for si, state in enumerate(states):
            h = holding_cost(state, instance.costs)
            best_v, best_a = -np.inf, 0
            for a in range(amax + 1):
                total = 0.0
                ok = True
                for z, w in data:
                    res = stage(state, a, z)
                    if res is None:
                        ok = False
                        break
                    c, ni = res
                    total += w * (-c + gamma * values[t, ni])
                if not ok:
                    break  # feasibility is monotone in a
                if total > best_v + 1e-12:
                    best_v, best_a = total, a
            values[t - 1, si] = -h + best_v
            actions[t - 1, si] = best_a

    return (
        ValueTable(tau, indexer, values),
        PolicyTable(tau, indexer, actions),
    )


def _sweep(instance, per_period, plan, gamma):
    for t, data in enumerate(per_period, start=1):
        w = sum(w for _, w in data)
        if abs(w - 1.0) > 1e-9:
            raise ValueError(f"period {t} weights sum to {w}, expected 1")
    if _single_lane_ids(instance) is not None:
        return _sweep_fast(instance, per_period, plan, gamma)
    return _sweep_generic(instance, per_period, plan, gamma)


def solve_scenario(
    instance: Instance,
    scenario: Scenario,
    plan: CapacityPlan,
    gamma: float = 1.0,
) -> Tuple[ValueTable, PolicyTable]:
    """Perfect-information DP along one scenario."""
    if len(scenario.realizations) != instance.horizon:
        raise ValueError("scenario length does not match horizon")
    per_period = [[(z, 1.0)] for z in scenario.realizations]
    return _sweep(instance, per_period, plan, gamma)


def solve_expected(
    instance: Instance,
    sample: SampleSet,
    plan: CapacityPlan,
    gamma: float = 1.0,
) -> Tuple[ValueTable, PolicyTable]:
    """Weighted-sample Bellman recursion (exact when sample enumerates).

    An action is kept only if the allocation LP is feasible under every
    realization sampled at that period.
    """
    if sample.periods != instance.horizon:
        raise ValueError("sample periods do not match horizon")
    per_period = [
        list(zip(sample.realizations[t], sample.weights[t]))
        for t in range(sample.periods)
    ]
    return _sweep(instance, per_period, plan, gamma)


def evaluate_policy(
    instance: Instance,
    policy: PolicyTable,
    sample: SampleSet,
    plan: CapacityPlan,
    gamma: float = 1.0,
) -> ValueTable:
    """Value of a FIXED policy under the sample weights (no maximization)."""
    indexer = policy.indexer
    tau = instance.horizon
    n = indexer.n_states
    states = indexer.all_states()
    values = np.empty((tau + 1, n))
    values[tau] = _terminal_row(instance, indexer)
    for t in range(tau, 0, -1):
        caps = plan_caps_at(plan, t)
        data = _collapse(
            list(zip(sample.realizations[t - 1], sample.weights[t - 1])), instance
        )
        for si, state in enumerate(states):
            a = int(policy.actions[t - 1, si])
            h = holding_cost(state, instance.costs)
            total = -h
            for z, w in data:
                prob = build_problem(state, a, z, caps, instance, period=t)
                sol = solve_allocation(prob)
                if sol is INFEASIBLE:
                    raise UndefinedPolicyState(
                        f"policy action {a} infeasible at period {t} state {state}"
                    )
                nxt = transition(state, sol.lane_totals(), z, instance.bounds)
                total += w * (-sol.cost + gamma * values[t, indexer.index_of(nxt)])
            values[t - 1, si] = total
    return ValueTable(tau, indexer, values)


# ---------------------------------------------------------------------------
# Rollout and surfaces


def rollout(
    instance: Instance,
    policy: PolicyTable,
    scenario: Scenario,
    plan: CapacityPlan,
    start: SystemState,
) -> Trajectory:
    """Execute the policy along a scenario; total = costs - terminal value.

    Raises UndefinedPolicyState when the recorded action is not allocatable
    under this scenario's realization (possible off-sample).
    """
    if len(scenario.realizations) != instance.horizon:
        raise ValueError("scenario length does not match horizon")
    state = start
    steps = []
    total = 0.0
    for t in range(1, instance.horizon + 1):
        z = scenario.realizations[t - 1]
        caps = plan_caps_at(plan, t)
        a = policy.action(t, state)
        prob = build_problem(state, a, z, caps, instance, period=t)
        sol = solve_allocation(prob)
        if sol is INFEASIBLE:
            raise UndefinedPolicyState(
                f"policy action {a} infeasible at period {t} state {state}"
            )
        imm = holding_cost(state, instance.costs) + sol.cost
        nxt = transition(state, sol.lane_totals(), z, instance.bounds)
        steps.append(TrajectoryStep(t, state, a, sol.lane_totals(), imm, nxt))
        total += imm
        state = nxt
    total -= terminal_value(state, instance.costs)
    return Trajectory(tuple(steps), total)


@dataclass(frozen=True)
class ValueSurface:
    period: int
    entry_levels: np.ndarray
    exit_levels: np.ndarray
    values: np.ndarray  # shape (len(entry_levels), len(exit_levels))

    def argmax_state(self) -> Tuple[int, int]:
        k = int(np.argmax(self.values))
        r, c = divmod(k, self.values.shape[1])
        return int(self.entry_levels[r]), int(self.exit_levels[c])

    def to_csv(self, path: str) -> None:
        with open(path, "w") as f:
            f.write("entry,exit,value\n")
            for r, e in enumerate(self.entry_levels):
                for c, s in enumerate(self.exit_levels):
                    f.write(f"{e},{s},{float(self.values[r, c])!r}\n")


def value_surface(table: ValueTable, period: int) -> ValueSurface:
    """Entry x exit value grid for one period (single-location only)."""
    idx = table.indexer
    if len(idx.entry_ids) != 1 or len(idx.exit_ids) != 1:
        raise ValueError("value surface requires one entry and one exit")
    ne, ns = idx.entry_sizes[0], idx.exit_sizes[0]
    if not 1 <= period <= table.horizon + 1:
        raise ValueError(f"period {period} outside 1..{table.horizon + 1}")
    grid = table.values[period - 1].reshape(ne, ns)
    return ValueSurface(
        period=period,
        entry_levels=np.arange(ne),
        exit_levels=np.arange(ns) - idx.exit_offsets[0],
        values=grid.copy(),
    )
