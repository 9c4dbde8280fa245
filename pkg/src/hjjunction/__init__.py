"""Monotone finite-difference scheme for Hamilton-Jacobi equations on a junction."""

from __future__ import annotations

from .hamiltonians import Hamiltonian, absolute, asymmetric, envelopes, quadratic, validate_hamiltonian
from .junction import DataError, Grid, GridField, Junction, JunctionError, JunctionPoint, geodesic_distance, sample_initial
from .junction_conditions import (
    FluxLimitedF,
    GeneralF,
    HypothesisError,
    ModifiedF,
    build_F_tilde,
    compute_A0,
    lower_inverse,
    validate_F,
)
from .scheme import (
    CFLError,
    GradientBounds,
    InvariantViolation,
    SchemeBlowup,
    SchemeConfig,
    compute_cfl,
    numerical_hamiltonian,
    run,
    scheme_step,
    stability_constant,
)
from .vertex import VertexTestFunction, certify_vertex

__version__ = "0.1.0"

__all__ = [
    "CFLError",
    "DataError",
    "FluxLimitedF",
    "GeneralF",
    "GradientBounds",
    "Grid",
    "GridField",
    "Hamiltonian",
    "HypothesisError",
    "InvariantViolation",
    "Junction",
    "JunctionError",
    "JunctionPoint",
    "ModifiedF",
    "SchemeBlowup",
    "SchemeConfig",
    "VertexTestFunction",
    "absolute",
    "asymmetric",
    "build_F_tilde",
    "certify_vertex",
    "compute_A0",
    "compute_cfl",
    "envelopes",
    "geodesic_distance",
    "lower_inverse",
    "numerical_hamiltonian",
    "quadratic",
    "run",
    "sample_initial",
    "scheme_step",
    "stability_constant",
    "validate_F",
    "validate_hamiltonian",
]
