"""Desk-scale numerical checks of sharp noncommutative convexity inequalities
and of free-group hypercontractivity constants."""

from .report import Outcome, VerificationReport
from .matalg import (
    PreconditionError,
    SchattenExponent,
    hermitian_eig,
    psd_power,
    schatten_norm,
    selfadjoint_dilation,
    trace,
)

__version__ = "0.1.0"

__all__ = [
    "Outcome",
    "VerificationReport",
    "PreconditionError",
    "SchattenExponent",
    "hermitian_eig",
    "psd_power",
    "schatten_norm",
    "selfadjoint_dilation",
    "trace",
]
