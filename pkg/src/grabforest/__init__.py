"""Grabbing particle system, Galton-Watson forests and exact small-instance oracles."""

from .errors import *  # noqa: F401,F403
from .forest import (
    LabeledForest,
    LukasiewiczWalk,
    PlanarForest,
    PlanarTree,
    ReproductionLaw,
    parse_forest,
    parse_forest_text,
    parse_law,
    parse_tree_text,
    shape_of,
    tree_probability,
)
from .grab import (
    ArmVector,
    SystemState,
    Trajectory,
    replay,
    sample_conditioned_arms,
    simulate_shape,
    simulate_terminal,
    simulate_trajectory,
    state_at,
)
from .gw import (
    ConditionedForestSpec,
    exponential_tilt,
    first_passage_pmf,
    molloy_reed_criterion,
    sample_forest,
    sample_forest_conditioned,
    sample_tree,
    size_biased,
    valid_shifts,
    walk_pmf,
)
from .oracle import (
    ExactLaw,
    enumerate_phi,
    enumerate_trees,
    exact_conditional_gw,
    exact_terminal_law,
)
from .rng import make_rng

__version__ = "0.1.0"
