"""Weighted Yamabe flow on symmetric grids (torus and zonal sphere)."""

from ._core import (
    BlowUp,
    DomainError,
    Error,
    Geometry,
    GeometryMismatch,
    InsufficientSignal,
    InvalidConfiguration,
    NoConvergence,
    energy,
    limit_profile,
    main,
    normalize_config,
    run_flow,
    spectral_basis,
    verify,
    weighted_curvature,
)

__all__ = [
    "BlowUp",
    "DomainError",
    "Error",
    "Geometry",
    "GeometryMismatch",
    "InsufficientSignal",
    "InvalidConfiguration",
    "NoConvergence",
    "energy",
    "limit_profile",
    "main",
    "normalize_config",
    "run_flow",
    "spectral_basis",
    "verify",
    "weighted_curvature",
]
