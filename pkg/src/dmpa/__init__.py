"""Two-colour directed preferential attachment with homophily.

Analytic limits of the red degree shares and power-law exponents, a fast
growth simulator, estimators for finite graphs, and a batch CLI.
"""
from .analytic import (
    ExponentReport,
    GCEVerdict,
    contraction_map,
    exponents_both_groups,
    glass_ceiling,
    solve_fixed_point,
    special_case,
)
from .model import AnalyticParams, Color, HomophilyMatrix, ModelParams, ThetaPair, validate_params
from .simulator import BACKEND, GrowthGraph, SimConfig, Simulation, simulate

__version__ = "0.1.0"

__all__ = [
    "AnalyticParams", "Color", "HomophilyMatrix", "ModelParams", "ThetaPair", "validate_params",
    "ExponentReport", "GCEVerdict", "contraction_map", "exponents_both_groups", "glass_ceiling",
    "solve_fixed_point", "special_case",
    "BACKEND", "GrowthGraph", "SimConfig", "Simulation", "simulate",
    "__version__",
]
