"""Drayage volume allocation: stochastic DP policies, multistage LP
relaxations, and capacity plan optimization for container moves between
entry and exit terminals."""

from .model import (
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
    exogenous_support_size,
    generate_default_plan,
    generate_instance,
    load_instance,
    load_plan,
    save_instance,
    save_plan,
    state_space_size,
    validate_instance,
)
from .alloc import holding_cost, immediate_cost, solve_allocation, transition
from .scenario import (
    SampleSet,
    SupportTooLarge,
    build_sample_set,
    enumerate_support,
    load_scenarios,
    realization_probability,
    sample_scenarios,
    save_scenarios,
    scenario_probability,
)
from .dp import (
    PolicyTable,
    Trajectory,
    UndefinedPolicyState,
    ValueSurface,
    ValueTable,
    evaluate_policy,
    feasible_actions,
    rollout,
    solve_expected,
    solve_scenario,
    terminal_value,
    value_surface,
)
from .mslp import (
    InfeasibleLP,
    MSLPSolution,
    MultistageLP,
    build_mslp,
    expected_value_lp,
    solve_mslp,
    write_lp_text,
)
from .capopt import (
    CapacityObjective,
    OptConfig,
    OptimizationResult,
    monte_carlo_search,
    objective,
    optimize_capacity,
    optimize_capacity_saa,
    quadratic_parameterization,
    reservation_cost,
    sample_objective,
    scenario_objective,
)
from .evaluation import (
    RegretRecord,
    generalization_report,
    per_scenario_optimum,
    regret_profile,
    summarize,
)

__version__ = "0.1.0"

__all__ = [
    "Bounds",
    "CapacityObjective",
    "CapacityPlan",
    "CostSpec",
    "ExogenousRealization",
    "InfeasibleLP",
    "Instance",
    "MSLPSolution",
    "MultistageLP",
    "Network",
    "OptConfig",
    "OptimizationResult",
    "PolicyTable",
    "RegretRecord",
    "SampleSet",
    "Scenario",
    "Source",
    "SupportTooLarge",
    "SystemState",
    "Trajectory",
    "UncertaintySpec",
    "UndefinedPolicyState",
    "ValueSurface",
    "ValueTable",
    "build_mslp",
    "build_sample_set",
    "enumerate_support",
    "evaluate_policy",
    "exogenous_support_size",
    "expected_value_lp",
    "feasible_actions",
    "generalization_report",
    "generate_default_plan",
    "generate_instance",
    "holding_cost",
    "immediate_cost",
    "load_instance",
    "load_plan",
    "load_scenarios",
    "monte_carlo_search",
    "objective",
    "optimize_capacity",
    "optimize_capacity_saa",
    "per_scenario_optimum",
    "quadratic_parameterization",
    "realization_probability",
    "regret_profile",
    "reservation_cost",
    "rollout",
    "sample_objective",
    "sample_scenarios",
    "save_instance",
    "save_plan",
    "save_scenarios",
    "scenario_objective",
    "scenario_probability",
    "solve_allocation",
    "solve_expected",
    "solve_mslp",
    "solve_scenario",
    "state_space_size",
    "summarize",
    "terminal_value",
    "transition",
    "validate_instance",
    "value_surface",
    "__version__",
]
