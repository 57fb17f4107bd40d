"""Normalisation constants by homotopy schedules, with Bayesian-evidence and particle-filter applications."""

__version__ = "0.1.0"

from ._kernels import BACKEND, HAS_NUMBA
from .bayes import (
    BayesProblem,
    evidence_auxiliary,
    evidence_likelihood_anchored,
    evidence_prior_anchored,
    oracle_evidence,
)
from .density import DensityPair, HomotopyPath, LogDensity, make_pair, parse_h
from .oracle import QuadratureSpec, integrate_log, log_z_of_exponent
from .samplers import MetropolisTuning, RngStream
from .schedule import ScheduleConfig, ScheduleTrace, predicted_variance, run_schedule

__all__ = [
    "__version__",
    "BACKEND",
    "HAS_NUMBA",
    "BayesProblem",
    "DensityPair",
    "HomotopyPath",
    "LogDensity",
    "MetropolisTuning",
    "QuadratureSpec",
    "RngStream",
    "ScheduleConfig",
    "ScheduleTrace",
    "evidence_auxiliary",
    "evidence_likelihood_anchored",
    "evidence_prior_anchored",
    "integrate_log",
    "log_z_of_exponent",
    "make_pair",
    "oracle_evidence",
    "parse_h",
    "predicted_variance",
    "run_schedule",
]
