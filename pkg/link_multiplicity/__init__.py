"""Hilbert-Samuel multiplicity of curve points estimated from uniform samples of their complex link."""

from link_multiplicity.estimator import EstimateReport, estimate_multiplicity
from link_multiplicity.harness import TrialPlan, TrialSummary, run_trials
from link_multiplicity.oracle import MultiplicityCertificate, certify

__all__ = [
    "EstimateReport",
    "MultiplicityCertificate",
    "TrialPlan",
    "TrialSummary",
    "certify",
    "estimate_multiplicity",
    "run_trials",
]
