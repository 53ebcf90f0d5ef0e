"""Forward models, missing-data injection and the analytic reference posterior."""

from src.simulators.datasets import load_datasets, save_datasets
from src.simulators.ddm import DdmBatch, DdmTrial, ddm_sample, ddm_sample_batch, wiener_upper_probability
from src.simulators.exp1 import (
    Exp1Config,
    GaussianPosterior,
    analytic_posterior_exp1,
    simulate_exp1,
    simulate_exp1_batch,
)
from src.simulators.exp2 import (
    PARAMETER_NAMES,
    Exp2Config,
    inject_missing,
    sample_prior_exp2,
    simulate_exp2,
    simulate_exp2_batch,
)

__all__ = [
    "load_datasets",
    "save_datasets",
    "DdmBatch",
    "DdmTrial",
    "ddm_sample",
    "ddm_sample_batch",
    "wiener_upper_probability",
    "Exp1Config",
    "GaussianPosterior",
    "analytic_posterior_exp1",
    "simulate_exp1",
    "simulate_exp1_batch",
    "PARAMETER_NAMES",
    "Exp2Config",
    "inject_missing",
    "sample_prior_exp2",
    "simulate_exp2",
    "simulate_exp2_batch",
]
