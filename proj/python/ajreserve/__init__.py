"""Claim-size-clock Aalen-Johansen reserving."""

from ._core import (
    ClaimRecord,
    Error,
    IoError,
    NumericError,
    ParseError,
    Simulation,
    StepCdf,
    ValidationError,
    chain_ladder,
    crps,
    error_incidence,
    fit_predict,
    read_claims,
    reproduce,
    residual_moment,
    simulate,
    tail_integral,
    write_claims,
)

__all__ = [
    "ClaimRecord",
    "Error",
    "IoError",
    "NumericError",
    "ParseError",
    "Simulation",
    "StepCdf",
    "ValidationError",
    "chain_ladder",
    "crps",
    "error_incidence",
    "fit_predict",
    "read_claims",
    "reproduce",
    "residual_moment",
    "simulate",
    "tail_integral",
    "write_claims",
]
