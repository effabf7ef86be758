"""Desk-scale numerical laboratory for multiplicity results on non-convex sets."""

from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    EmptySetError,
    HypothesisError,
    LabError,
    NoWitnessFound,
    NonFiniteError,
)
from .kernels import BACKEND

__version__ = "0.1.0"
