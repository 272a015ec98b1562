"""Synthesis of shared-control strategies for stochastic systems.

The package models the loop where a human and an autonomous agent jointly
operate a system: human commands are blended with an autonomous strategy,
and the autonomous strategy is synthesized so that the blend provably meets
probabilistic safety and performance requirements while deviating as little
as possible from the human's intent.
"""

from .checking import (
    CheckResult,
    ExpectedCost,
    SafetyReach,
    Specification,
    UntilProb,
    check,
    expected_costs,
    reach_probabilities,
    until_probabilities,
)
from .estimation import (
    Trajectory,
    estimate_strategy,
    hoeffding_sample_size,
    record_trajectory,
)
from .explicit import export_explicit, import_explicit
from .gridworld import (
    GridScenario,
    LabeledMdp,
    Obstacle,
    baseline_human_strategy,
    best_case_heatmap,
    compile_scenario,
    heatmap_matrix,
    safety_spec,
    worst_case_heatmap,
)
from .model import (
    BlendingFunction,
    MarkovChain,
    Mdp,
    Perturbation,
    Strategy,
    apply_perturbation,
    blend,
    deterministic_strategy,
    deviation_inf_norm,
    induce_mc,
    perturbation_between,
    uniform_strategy,
    validate_mdp,
    validate_strategy,
)
from .synthesis import (
    FEASIBLE,
    INFEASIBLE,
    SOLVER_LIMIT,
    RepairBounds,
    SynthesisProblem,
    SynthesisResult,
    compare_deviation,
    generalized_blending,
    local_strategy_box,
    min_reach_over_box,
    repair_bounds,
    repair_synthesize,
    synthesize_general,
    synthesize_reachability,
)

__version__ = "0.1.0"

__all__ = [
    "BlendingFunction",
    "CheckResult",
    "ExpectedCost",
    "FEASIBLE",
    "GridScenario",
    "INFEASIBLE",
    "LabeledMdp",
    "MarkovChain",
    "Mdp",
    "Obstacle",
    "Perturbation",
    "RepairBounds",
    "SOLVER_LIMIT",
    "SafetyReach",
    "Specification",
    "Strategy",
    "SynthesisProblem",
    "SynthesisResult",
    "Trajectory",
    "UntilProb",
    "apply_perturbation",
    "baseline_human_strategy",
    "best_case_heatmap",
    "blend",
    "check",
    "compare_deviation",
    "compile_scenario",
    "deterministic_strategy",
    "deviation_inf_norm",
    "estimate_strategy",
    "expected_costs",
    "export_explicit",
    "generalized_blending",
    "heatmap_matrix",
    "hoeffding_sample_size",
    "import_explicit",
    "induce_mc",
    "local_strategy_box",
    "min_reach_over_box",
    "perturbation_between",
    "reach_probabilities",
    "record_trajectory",
    "repair_bounds",
    "repair_synthesize",
    "safety_spec",
    "synthesize_general",
    "synthesize_reachability",
    "uniform_strategy",
    "until_probabilities",
    "validate_mdp",
    "validate_strategy",
    "worst_case_heatmap",
]
