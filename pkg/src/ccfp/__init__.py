"""Structure-preserving Chang-Cooper type schemes for mean-field Fokker-Planck equations."""

from .fpcore import FPProblem, InterfaceCoefficients, compute_coefficients, delta_formula, discrete_steady_state
from .grid import Grid1D, Grid2D
from .integrators import TimeStepper
from .quadrature import QuadratureRule, RuleKind

__all__ = [
    "FPProblem",
    "Grid1D",
    "Grid2D",
    "InterfaceCoefficients",
    "QuadratureRule",
    "RuleKind",
    "TimeStepper",
    "compute_coefficients",
    "delta_formula",
    "discrete_steady_state",
]

__version__ = "0.1.0"
