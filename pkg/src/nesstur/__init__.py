"""Boundary-driven two-qubit steady states: relaxation thermodynamics,
two-point-measurement work statistics, uncertainty bounds and entanglement
analysis."""

from ._core import backend
from .model import NessCoefficients, SystemParams, ness_analytic, ness_density_matrix

__version__ = "0.1.0"

__all__ = [
    "SystemParams",
    "NessCoefficients",
    "ness_analytic",
    "ness_density_matrix",
    "backend",
    "__version__",
]
