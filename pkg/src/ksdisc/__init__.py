"""Coarse-grid discretisations of the Kuramoto-Sivashinsky equation.

Library + CLI covering holistic (subgrid-resolving), centered-difference
and sine-Galerkin models, with steady-state continuation, bifurcation
detection, periodic-orbit shooting, stability time-step search and
spectral diagnostics at desk scale.
"""

__version__ = "0.1.0"

from .errors import KsError
from .models import GalerkinState, GridField, ModelSpec
from .odd import OddState
from .systems import Geometry, make_system

__all__ = [
    "KsError",
    "ModelSpec",
    "GridField",
    "GalerkinState",
    "OddState",
    "Geometry",
    "make_system",
    "__version__",
]
