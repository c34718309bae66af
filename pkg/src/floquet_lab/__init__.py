"""Numerical toolkit for a resonant Floquet lattice operator on Z^2.

The operator is diag(n + j^2) plus a weak nearest-diagonal hopping delta.
Submodules: lattice construction, Feshbach reduction onto the resonant
parabola, local Newton eigenpair solves, localization and spacing analysis,
and a split-step propagator with Bloch-wave cross-validation.
"""

from .errors import (
    ClassificationError,
    FloquetLabError,
    NewtonDivergenceError,
    ResolventSingularError,
    ResonanceCollisionError,
)
from .evolution import FourierState, Trajectory, bloch_reconstruct, build_bloch_basis, evolve, sobolev_norm
from .feshbach import effective_operator, spectral_membership, verify_h1
from .lattice import FloquetOperator, LatticeBox, Site, build_operator, resonant_sites
from .localization import boundary_norm_report, classify_spectrum, local_spectrum_scan, spacing_report
from .newton import EigenPair, LambdaBox, eigenvalue_asymptotics, solve_local_eigenpair

__version__ = "0.1.0"

__all__ = [
    "ClassificationError",
    "EigenPair",
    "FloquetLabError",
    "FloquetOperator",
    "FourierState",
    "LambdaBox",
    "LatticeBox",
    "NewtonDivergenceError",
    "ResolventSingularError",
    "ResonanceCollisionError",
    "Site",
    "Trajectory",
    "bloch_reconstruct",
    "boundary_norm_report",
    "build_bloch_basis",
    "build_operator",
    "classify_spectrum",
    "effective_operator",
    "eigenvalue_asymptotics",
    "evolve",
    "local_spectrum_scan",
    "resonant_sites",
    "sobolev_norm",
    "solve_local_eigenpair",
    "spacing_report",
    "spectral_membership",
    "verify_h1",
    "__version__",
]
