"""Simulation and analysis of transient cross-phase modulation in EIT media."""

__version__ = "0.1.0"

from .errors import XpmError
from .model import (
    FieldParams,
    MediumParams,
    PhaseTrace,
    SignalPulse,
    SpectralWindow,
    TimeGrid,
    photon_number,
    signal_bandwidth,
    to_angular,
    to_hz,
)

__all__ = [
    "FieldParams",
    "MediumParams",
    "PhaseTrace",
    "SignalPulse",
    "SpectralWindow",
    "TimeGrid",
    "XpmError",
    "photon_number",
    "signal_bandwidth",
    "to_angular",
    "to_hz",
]
