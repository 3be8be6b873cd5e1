"""Bundled single-lane example: one strategic and one spot source, 4 periods.

Two pre-wired studies share the network, bounds, costs, and distributions and
differ only in the strategic source's terms:

  "policy"    execution $14.7/TEU, used for value-surface and rollout demos
  "capacity"  execution $2.94/TEU with per-period reservation rates, used for
              capacity-search and regret experiments

Also provides the fixed demonstration scenario and the two capacity plans
(the imposed baseline and the tuned arrangement) referenced by tests and CLI
examples.
"""

from typing import Dict, Tuple

from .model import (
    SPOT,
    STRATEGIC,
    Bounds,
    CapacityPlan,
    CostSpec,
    ExogenousRealization,
    Instance,
    Network,
    Scenario,
    Source,
    SystemState,
    UncertaintySpec,
)
from .scenario import realization_probability

LANE = (1, 2)
HORIZON = 4

INFLOW = {0: 0.4, 4: 0.3, 8: 0.3}
OUTFLOW = {0: 0.25, 4: 0.25, 8: 0.5}
SPOT_RATES = {7.0: 0.4, 22.0: 0.6}

STRATEGIC_RATE = {"policy": 14.7, "capacity": 2.94}
RESERVATION = (8.52, 4.46, 4.25, 9.70)


def example_instance(study: str = "capacity") -> Instance:
    if study not in STRATEGIC_RATE:
        raise ValueError(f"unknown study {study!r}; expected 'policy' or 'capacity'")
    w = STRATEGIC_RATE[study]
    network = Network(entries=(1,), exits=(2,), lanes=(LANE,))
    sources = (
        Source(
            id=1,
            kind=STRATEGIC,
            lanes=(LANE,),
            execution_cost={LANE: (w,) * HORIZON},
            reservation_rate=RESERVATION,
        ),
        Source(
            id=2,
            kind=SPOT,
            lanes=(LANE,),
            execution_cost=None,
            reservation_rate=(0.0,) * HORIZON,
        ),
    )
    return Instance(
        network=network,
        sources=sources,
        bounds=Bounds(
            entry_max={1: 10},
            exit_max={2: 10},
            exit_backorder_max={2: 10},
            action_max=10,
        ),
        costs=CostSpec(
            entry_holding={1: 15.0},
            exit_holding={2: 12.0},
            exit_backorder={2: 24.0},
            terminal_slopes=(15.0, 12.0, 24.0),
        ),
        uncertainty=UncertaintySpec(
            inflow_dist={1: dict(INFLOW)},
            outflow_dist={2: dict(OUTFLOW)},
            spot_rate_dist={2: dict(SPOT_RATES)},
        ),
        horizon=HORIZON,
        initial_state=SystemState(entry_stock={1: 0}, exit_stock={2: 8}),
    )


# the fixed demonstration path: heavy early arrivals, sustained departures,
# spot rate alternating cheap/expensive
DEMO_INFLOWS = (8, 8, 0, 0)
DEMO_OUTFLOWS = (8, 8, 8, 0)
DEMO_SPOT = (7.0, 22.0, 7.0, 22.0)


def example_scenario(instance: Instance = None) -> Scenario:
    inst = instance if instance is not None else example_instance()
    reals = []
    p_total = 1.0
    for t in range(HORIZON):
        z = ExogenousRealization(
            inflow={1: DEMO_INFLOWS[t]},
            outflow={2: DEMO_OUTFLOWS[t]},
            spot_rates={2: {LANE: DEMO_SPOT[t]}},
            probability=1.0,
        )
        p = realization_probability(z, inst)
        reals.append(
            ExogenousRealization(z.inflow, z.outflow, z.spot_rates, p)
        )
        p_total *= p
    return Scenario(tuple(reals), p_total)


def baseline_plan() -> CapacityPlan:
    """The imposed capacity arrangement the demos start from."""
    return CapacityPlan(capacity={1: (4, 3, 2, 4), 2: (4, 4, 4, 4)})


def tuned_plan() -> CapacityPlan:
    """The optimized arrangement for the demonstration scenario."""
    return CapacityPlan(capacity={1: (0, 8, 0, 0), 2: (4, 4, 8, 4)})
