"""
Grids, function classes and noise models shared by every experiment.
"""
from models.grid import Grid, GridDistribution, GridFunction, default_grid
from models.function_class import (
    FunctionClassSpec,
    PerturbedFunction,
    RateConstants,
    budget_bump,
    check_membership,
    check_neighborhood,
    rates,
    smooth_bump,
)
from models.noise import NoiseModel, gaussian_noise, logistic_noise, match_fisher, tabulated_noise

__all__ = [
    "Grid",
    "GridDistribution",
    "GridFunction",
    "default_grid",
    "FunctionClassSpec",
    "PerturbedFunction",
    "RateConstants",
    "budget_bump",
    "check_membership",
    "check_neighborhood",
    "rates",
    "smooth_bump",
    "NoiseModel",
    "gaussian_noise",
    "logistic_noise",
    "match_fisher",
    "tabulated_noise",
]
