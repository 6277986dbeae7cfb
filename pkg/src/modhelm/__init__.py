"""Boundary integral solver for the modified Helmholtz equation in 2-D."""

from .errors import (BesselOverflowError, ConfigurationError, ConvergenceError, DomainError,
                     GeometryError, ModHelmError)
from .estimator import ModifiedHelmholtzSolver
from .geometry import Curve, Domain, curve_from_fourier, ellipse
from .kernels import DiscreteOperator, KernelKind
from .postprocess import FieldGrid, disk_solution, eval_field, max_error, reference_solution
from .solver import ProblemSpec, Solution, gmres, solve

__version__ = "0.1.0"

__all__ = [
    "BesselOverflowError", "ConfigurationError", "ConvergenceError", "Curve",
    "DiscreteOperator", "Domain", "DomainError", "FieldGrid", "GeometryError", "KernelKind",
    "ModHelmError", "ModifiedHelmholtzSolver", "ProblemSpec", "Solution", "curve_from_fourier",
    "disk_solution", "ellipse", "eval_field", "gmres", "max_error", "reference_solution",
    "solve",
]
