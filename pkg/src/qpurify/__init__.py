"""Qubit purification under continuous measurement, with and without feedback."""

from .bloch import (
    BlochState,
    ito_step,
    linear_entropy,
    log_entropy_drift,
    measurement_step,
    purity,
)
from .kernels import BACKEND
from .protocols import Protocol, apply_control, jacobs_purity, simulated_jacobs_step

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BlochState",
    "Protocol",
    "apply_control",
    "ito_step",
    "jacobs_purity",
    "linear_entropy",
    "log_entropy_drift",
    "measurement_step",
    "purity",
    "simulated_jacobs_step",
]
