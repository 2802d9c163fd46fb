"""Adaptive kernel density estimation trained by leave-one-out likelihood."""

__version__ = "0.1.0"

from .data import Dataset, NormStats, SplitSpec, load_csv, train_test_split, zscore_apply, zscore_fit
from .density import (
    KernelDensityModel,
    log_density,
    loo_gradient,
    loo_mll,
    loo_upper_bound,
    sample,
    total_mll,
)
from .gmm import GmmModel, fit_gmm, matched_component_count
from .pipeline import PipelineConfig, compare_models
from .trainer import AdamConfig, EmConfig, fit_adam, fit_em
