"""Scenario generation, the greedy baseline and the experiment suites"""

from .baseline import GreedyMatcher, run_baseline
from .experiments import (
    coalition_audit,
    experiment_baseline_comparison,
    experiment_gamma_sweep,
    experiment_relation_sweep,
    experiment_weight_promotion,
    run_session,
    social_index_series,
)
from .generator import ScenarioSpec, community_spec, generate_scenario, village_spec

__all__ = [
    "GreedyMatcher",
    "ScenarioSpec",
    "coalition_audit",
    "community_spec",
    "experiment_baseline_comparison",
    "experiment_gamma_sweep",
    "experiment_relation_sweep",
    "experiment_weight_promotion",
    "generate_scenario",
    "run_baseline",
    "run_session",
    "social_index_series",
    "village_spec",
]
