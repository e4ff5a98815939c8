"""Constrained entropic optimal transport for distribution repair.

The package computes group-blind repair maps: couplings between a source
histogram and a target histogram whose columns keep the group-conditional
disparity inside a prescribed band. Moving every record through such a map
equalizes what the two groups look like downstream while touching each
record as little as the transport cost allows.

Modules
-------
core
    Supports, histograms, couplings, costs, and the disparity vector.
projections
    The seven constraint sets with exact Bregman proximal maps.
solver
    Dykstra iterations in the log domain plus the repair and barycentre
    front ends.
datasets
    Weighted sample collections with group and label annotations.
repair
    Turning couplings into row-stochastic maps and applying them to data.
metrics
    Distributional and classification fairness measurements.
data_io
    CSV and JSON persistence, discretization, feature selection.
experiments
    The synthetic mixture study and the census study, also available
    through the ``otparity`` command line tool.
"""
from .core import (
    CostMatrix,
    Coupling,
    DisparityVector,
    Histogram,
    RepairBand,
    SolverError,
    Support,
    ValidationError,
    cost_matrix,
    disparity_vector,
    entropy,
    gibbs_kernel,
    kl_divergence,
    make_histogram,
    product_coupling,
    tv_distance,
)
from .data_io import (
    ADULT_FEATURES,
    DatasetSchema,
    build_support,
    cost_weights_from_ranges,
    discretize_floor,
    feature_selection_by_tv,
    load_adult,
    load_coupling,
    load_dataset,
    load_histogram,
    load_scores,
    save_coupling,
    save_dataset,
    save_histogram,
)
from .datasets import WeightedDataset, WeightedSample
from .experiments import (
    AdultRun,
    SyntheticConfig,
    SyntheticRun,
    TrialResult,
    adult_experiment,
    repaired_prediction,
    synthetic_experiment,
    train_stub_classifier,
)
from .metrics import (
    GroupConfusion,
    MetricReport,
    confusion_from_predictions,
    disparate_impact,
    empirical_distribution,
    f1_scores,
    groupwise_distributions,
    s_wise_tv,
)
from .projections import (
    BandMultiplier,
    Capacity,
    ColEq,
    ColLeq,
    ParityBand,
    RowEq,
    RowLeq,
    TotalMass,
    prox_capacity,
    prox_col_eq,
    prox_col_leq,
    prox_parity_band,
    prox_row_eq,
    prox_row_leq,
    prox_total_mass,
    solve_band_multiplier,
)
from .repair import (
    ProjectionMap,
    apply_map,
    projection_map,
    pushforward_conditional,
    theta_bound_check,
)
from .solver import (
    SolveConfig,
    SolveReport,
    barycentre_group_maps,
    bregman_iterate,
    dykstra,
    residuals,
    solve_barycentre_coupling,
    solve_repair_coupling,
)

__version__ = "0.1.0"

__all__ = [
    "ADULT_FEATURES",
    "AdultRun",
    "BandMultiplier",
    "Capacity",
    "ColEq",
    "ColLeq",
    "CostMatrix",
    "Coupling",
    "DatasetSchema",
    "DisparityVector",
    "GroupConfusion",
    "Histogram",
    "MetricReport",
    "ParityBand",
    "ProjectionMap",
    "RepairBand",
    "RowEq",
    "RowLeq",
    "SolveConfig",
    "SolveReport",
    "SolverError",
    "Support",
    "SyntheticConfig",
    "SyntheticRun",
    "TotalMass",
    "TrialResult",
    "ValidationError",
    "WeightedDataset",
    "WeightedSample",
    "adult_experiment",
    "apply_map",
    "barycentre_group_maps",
    "bregman_iterate",
    "build_support",
    "confusion_from_predictions",
    "cost_matrix",
    "cost_weights_from_ranges",
    "discretize_floor",
    "disparate_impact",
    "disparity_vector",
    "dykstra",
    "empirical_distribution",
    "entropy",
    "f1_scores",
    "feature_selection_by_tv",
    "gibbs_kernel",
    "groupwise_distributions",
    "kl_divergence",
    "load_adult",
    "load_coupling",
    "load_dataset",
    "load_histogram",
    "load_scores",
    "make_histogram",
    "product_coupling",
    "projection_map",
    "prox_capacity",
    "prox_col_eq",
    "prox_col_leq",
    "prox_parity_band",
    "prox_row_eq",
    "prox_row_leq",
    "prox_total_mass",
    "pushforward_conditional",
    "repaired_prediction",
    "residuals",
    "s_wise_tv",
    "save_coupling",
    "save_dataset",
    "save_histogram",
    "solve_band_multiplier",
    "solve_barycentre_coupling",
    "solve_repair_coupling",
    "synthetic_experiment",
    "theta_bound_check",
    "train_stub_classifier",
    "tv_distance",
]
