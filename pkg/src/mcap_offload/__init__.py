"""Joint task offloading and resource allocation for multi-CAP edge computing."""
from .alloc import AllocResult, allocation_oracle, optimize_allocation
from .experiments import GeneratorConfig, SweepSpec, compare_placement, generate_scenario, run_sweep
from .game import best_response, fip, mcap_ne, potential, strategy_set, verify_ne
from .model import (
    Allocation,
    Cap,
    Cloud,
    CostBreakdown,
    Scenario,
    Strategy,
    StrategyProfile,
    Task,
    evaluate,
    individual_cost,
    load_scenario,
    save_scenario,
    validate_profile,
)
from .oracle import exhaustive, random_mapping, random_profile
from .relax import (
    assemble_qcqp,
    extract_marginals,
    lift_to_sdp,
    mcap,
    round_trials,
    solve_sdp,
)

__version__ = "0.1.0"

__all__ = [
    "AllocResult",
    "Allocation",
    "Cap",
    "Cloud",
    "CostBreakdown",
    "GeneratorConfig",
    "Scenario",
    "Strategy",
    "StrategyProfile",
    "SweepSpec",
    "Task",
    "allocation_oracle",
    "assemble_qcqp",
    "best_response",
    "compare_placement",
    "evaluate",
    "exhaustive",
    "extract_marginals",
    "fip",
    "generate_scenario",
    "individual_cost",
    "lift_to_sdp",
    "load_scenario",
    "mcap",
    "mcap_ne",
    "optimize_allocation",
    "potential",
    "random_mapping",
    "random_profile",
    "round_trials",
    "run_sweep",
    "save_scenario",
    "solve_sdp",
    "strategy_set",
    "validate_profile",
    "verify_ne",
]
