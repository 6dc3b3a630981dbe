"""Sparse pathway estimation for mediation through two ordered mediator sets."""

from .admm import FitOptions, FitResult, active_sets, fit
from .effects import PathwayEffects, mspe, pathway_effects, predicted_values
from .model import (
    Coefficients,
    Dataset,
    PenaltyConfig,
    SequentialTruth,
    loss,
    objective,
    sequential_to_marginal,
    standardize,
)
from .simulation import ExperimentReport, NoiseScales, SimConfig, default_truth, generate, run_experiment
from .tuning import TuningPlan, bic, grid_search

__version__ = "0.1.0"

__all__ = [
    "Coefficients", "Dataset", "ExperimentReport", "FitOptions", "FitResult", "NoiseScales",
    "PathwayEffects", "PenaltyConfig", "SequentialTruth", "SimConfig", "TuningPlan",
    "active_sets", "bic", "default_truth", "fit", "generate", "grid_search", "loss", "mspe",
    "objective", "pathway_effects", "predicted_values", "run_experiment",
    "sequential_to_marginal", "standardize",
]
