"""Certified bounds on the revenue of two-sample empirical revenue maximisation.

For a regular distribution given by its concave revenue curve, the package
computes the expected revenue of posting the empirically better of two
sampled prices, and bounds the worst case of that revenue relative to the
optimal revenue via mixed-integer programs and grid search.
"""

from .bisample import Enclosure, erm_revenue_enclosure, erm_revenue_mc, phi, ratio
from .curve import RevenueCurve, concave_hull_curve, load_curve, validate_curve
from .gauge import Gauge, Weighting, lower_gauge, uniform_gauge
from .gridsearch import ThreePieceParams, eta_grid, three_piece_curve
from .model import MilpModel, build_lower_model, build_upper_model, extract_curve
from .solve import SolveOptions, SolveResult, certified_bound, reference_solve, solve
from .sweep import error_budget, run_lower_sweep, run_upper_sweep

__all__ = [
    "Enclosure", "Gauge", "MilpModel", "RevenueCurve", "SolveOptions", "SolveResult", "ThreePieceParams",
    "Weighting", "build_lower_model", "build_upper_model", "certified_bound", "concave_hull_curve",
    "erm_revenue_enclosure", "erm_revenue_mc", "error_budget", "eta_grid", "extract_curve", "load_curve",
    "lower_gauge", "phi", "ratio", "reference_solve", "run_lower_sweep", "run_upper_sweep", "solve",
    "three_piece_curve", "uniform_gauge", "validate_curve",
]
