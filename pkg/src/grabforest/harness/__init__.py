"""Statistical harness: empirical measures, tests, experiments and reports."""

from .experiments import (
    config_model_cluster_experiment,
    cycle_lemma_check,
    dwass_experiment,
    pair_factorization_experiment,
    sampler_equivalence_experiment,
    supercritical_k_experiment,
    theorem1_experiment,
    theorem2_experiment,
    tree_count_experiment,
)
from .report import ExperimentReport
from .stats import (
    EmpiricalMeasure,
    chi_square_test,
    count_tree,
    empirical_measure,
    independence_test,
    tv_distance,
)
from .verify import (
    kemperman_check,
    lemma1_all,
    lemma1_check,
    ratio_limit_check,
    sizebias_check,
    theorem1_exact,
    tilt_check,
)

__all__ = [
    "EmpiricalMeasure",
    "ExperimentReport",
    "chi_square_test",
    "config_model_cluster_experiment",
    "count_tree",
    "cycle_lemma_check",
    "dwass_experiment",
    "empirical_measure",
    "independence_test",
    "kemperman_check",
    "lemma1_all",
    "lemma1_check",
    "pair_factorization_experiment",
    "ratio_limit_check",
    "sampler_equivalence_experiment",
    "sizebias_check",
    "supercritical_k_experiment",
    "theorem1_exact",
    "theorem1_experiment",
    "theorem2_experiment",
    "tilt_check",
    "tree_count_experiment",
    "tv_distance",
]
