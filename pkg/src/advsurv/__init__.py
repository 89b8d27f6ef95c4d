"""Time-to-event modeling toolkit.

Models: an adversarial conditional generator for event times (DATE), a deep
regularized log-normal AFT baseline (DRAFT), and linear Cox proportional
hazards. Supporting modules: parametric survival math, a minimal autodiff
network core, censoring-aware metrics, dataset ingestion/synthesis, and a
batch CLI.
"""
from . import coxph, data, date, distributions, draft, metrics, ndnet
from .rng import RngStreams

__version__ = "0.1.0"

__all__ = [
    "RngStreams",
    "coxph",
    "data",
    "date",
    "distributions",
    "draft",
    "metrics",
    "ndnet",
]
