"""Pooled Bewley estimation of long-run coefficients in heterogeneous panels.

The package also provides the PMG, PDOLS and group-mean FMOLS estimators,
split-panel jackknife and sieve wild bootstrap bias corrections, and a Monte
Carlo harness.
"""

from .cointreg import fmols_group_mean, long_run_covariance, pdols_estimate
from .dgp import DgpConfig, generate_panel, simulate_ardl_panel
from .inference import (
    BootstrapDraws,
    CorrectedEstimate,
    EstimatorOptions,
    bootstrap_correct,
    bootstrap_critical_value,
    confidence_interval,
    fit,
    jackknife_correct,
    jackknife_kappa,
    jackknife_variance,
    sieve_wild_bootstrap,
)
from .io import load_panel_csv, read_panel_csv, write_panel
from .kernels import BACKEND
from .montecarlo import McSummary, run_experiment
from .panel import (
    PanelDataset,
    PanelError,
    PooledSingularityError,
    SingularInstrumentsError,
    UnitSeries,
)
from .pb import PbResult, pb_estimate, pb_variance
from .pmg import PmgResult, pmg_estimate, pmg_variance

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BootstrapDraws", "CorrectedEstimate", "DgpConfig", "EstimatorOptions",
    "McSummary", "PanelDataset", "PanelError", "PbResult", "PmgResult",
    "PooledSingularityError", "SingularInstrumentsError", "UnitSeries",
    "bootstrap_correct", "bootstrap_critical_value", "confidence_interval", "fit",
    "fmols_group_mean", "generate_panel", "jackknife_correct", "jackknife_kappa",
    "jackknife_variance", "load_panel_csv", "long_run_covariance", "pb_estimate",
    "pb_variance", "pdols_estimate", "pmg_estimate", "pmg_variance", "read_panel_csv",
    "run_experiment", "sieve_wild_bootstrap", "simulate_ardl_panel", "write_panel",
]
