"""Stepwise and joint estimation of a two-parameter qubit rotation.

The probe |0> passes through U = exp[-i gamma (cos theta sx + sin theta sz)]
and is measured in the Z basis. The package provides the state model and its
information matrices, asymptotic (Cramer-Rao, Holevo) and Bayesian (Van Trees)
bounds, grid-based Bayesian estimators and a seeded Monte Carlo simulator.
"""
from .bayes import GaussianPrior, stepwise_protocol
from .bounds import (
    BoundReport,
    ResourceSplit,
    bound_report,
    crb_matrix,
    holevo_bound,
    pinv_crb,
    ratio_r,
    stepwise_trace,
    van_trees_classical_stepwise,
    van_trees_quantum,
    van_trees_trace,
)
from .model import InfoMatrix, ParamPoint, cfim_z, outcome_probs, qfim
from .sim import CampaignConfig, CampaignResult, run_campaign
from .table import OutputTable

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "CampaignConfig",
    "CampaignResult",
    "GaussianPrior",
    "InfoMatrix",
    "OutputTable",
    "ParamPoint",
    "ResourceSplit",
    "bound_report",
    "cfim_z",
    "crb_matrix",
    "holevo_bound",
    "outcome_probs",
    "pinv_crb",
    "qfim",
    "ratio_r",
    "run_campaign",
    "stepwise_protocol",
    "stepwise_trace",
    "van_trees_classical_stepwise",
    "van_trees_quantum",
    "van_trees_trace",
]
