"""Unweighted layered graph traversal: entropic policy, baselines, verification."""

from .adversaries import (
    Instance,
    MaxMassAdversary,
    adaptive_dfs_lengths,
    gen_alternating,
    gen_comb,
    gen_random,
    gen_star,
    load_instance,
    save_instance,
)
from .baselines import (
    DfsPolicy,
    RandomDfsPolicy,
    UniformPolicy,
    make_policy,
    random_dfs_conditionals,
    uniform_configuration,
)
from .configuration import (
    Configuration,
    TransportPlan,
    entropy_value,
    ot_cost,
    ot_coupling,
    sample_transition,
)
from .entropic import EntropicPolicy, PotentialBreakdown, explicit_argmin, potential
from .harness import (
    RandomizedStats,
    RunConfig,
    Trace,
    report,
    report_stats,
    run_fractional,
    run_randomized,
)
from .tree import DeactivationRecord, LayeredTree, LayerUpdate

__all__ = [
    "Configuration",
    "DeactivationRecord",
    "DfsPolicy",
    "EntropicPolicy",
    "Instance",
    "LayerUpdate",
    "LayeredTree",
    "MaxMassAdversary",
    "PotentialBreakdown",
    "RandomDfsPolicy",
    "RandomizedStats",
    "RunConfig",
    "Trace",
    "TransportPlan",
    "UniformPolicy",
    "adaptive_dfs_lengths",
    "entropy_value",
    "explicit_argmin",
    "gen_alternating",
    "gen_comb",
    "gen_random",
    "gen_star",
    "load_instance",
    "make_policy",
    "ot_cost",
    "ot_coupling",
    "potential",
    "random_dfs_conditionals",
    "report",
    "report_stats",
    "run_fractional",
    "run_randomized",
    "sample_transition",
    "save_instance",
    "uniform_configuration",
]
