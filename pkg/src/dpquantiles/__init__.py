"""Differentially private estimation of many quantiles at once."""

from ._backend import BACKEND
from .baseline_aq import AQBudget, aq_quantiles, calibrate_zcdp, zcdp_to_dp
from .continual_counting import (ContiguousShift, TreeMechanismConfig, TreeNode, cc_error_bound, cc_noise,
                                 cc_perturb, cc_tail_bound, interval_decomposition, shift_node_delta)
from .datasets import PreprocessSpec, RawColumn, load_csv, preprocess, quantile_grid, synthesize
from .errors import ConfigError, DPQuantilesError, EmptyDatasetError, GapTooSmallError
from .exp_mechanism import (SortedDataset, exact_interval_probabilities, single_quantile, slice_median,
                            slice_median_param)
from .neighbor_maps import enumerate_good, map_add, map_remove, naive_map_remove, verify_lemma
from .slice_quantiles import (PrivacyBudget, QuantileEstimates, QuantileQuery, SliceParams, calibrate_approx,
                              calibrate_pure, good_set_contains, max_rank_error, privacy_guarantee,
                              slice_quantiles)

__version__ = "0.1.0"

__all__ = [
    "AQBudget", "BACKEND", "ConfigError", "ContiguousShift", "DPQuantilesError", "EmptyDatasetError",
    "GapTooSmallError", "PreprocessSpec", "PrivacyBudget", "QuantileEstimates", "QuantileQuery", "RawColumn",
    "SliceParams", "SortedDataset", "TreeMechanismConfig", "TreeNode", "aq_quantiles", "calibrate_approx",
    "calibrate_pure", "calibrate_zcdp", "cc_error_bound", "cc_noise", "cc_perturb", "cc_tail_bound",
    "enumerate_good", "exact_interval_probabilities", "good_set_contains", "interval_decomposition",
    "load_csv", "map_add", "map_remove", "max_rank_error", "naive_map_remove", "preprocess",
    "privacy_guarantee", "quantile_grid", "shift_node_delta", "single_quantile", "slice_median",
    "slice_median_param", "slice_quantiles", "synthesize", "verify_lemma", "zcdp_to_dp",
]
