"""Shared domain types, unit conventions and pulse/photon arithmetic.

All rates and detunings are stored as angular frequencies (rad/s); times are
in seconds. Quoted laboratory values in Hz go through :func:`to_angular`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.constants import c as C_LIGHT, h as PLANCK

from .errors import InvalidParameterError

TWO_PI = 2.0 * math.pi

#: Rb D2 natural linewidth (rad/s).
GAMMA_D2 = TWO_PI * 6.07e6
#: Rb D2 vacuum wavelength (m).
WAVELENGTH_D2 = 780.24e-9


def to_angular(f_hz):
    """Convert ordinary frequency in Hz to angular frequency in rad/s."""
    return TWO_PI * np.asarray(f_hz, dtype=float) if np.ndim(f_hz) else TWO_PI * float(f_hz)


def to_hz(omega):
    return np.asarray(omega, dtype=float) / TWO_PI if np.ndim(omega) else float(omega) / TWO_PI


def photon_number(energy, wavelength=WAVELENGTH_D2):
    """Number of photons of the given vacuum wavelength carrying ``energy`` joules."""
    if not wavelength > 0:
        raise InvalidParameterError(f"wavelength must be positive, got {wavelength!r}")
    if np.any(np.asarray(energy) < 0):
        raise InvalidParameterError("energy must be non-negative")
    return energy * wavelength / (PLANCK * C_LIGHT)


def photon_energy(wavelength=WAVELENGTH_D2):
    if not wavelength > 0:
        raise InvalidParameterError(f"wavelength must be positive, got {wavelength!r}")
    return PLANCK * C_LIGHT / wavelength


def signal_bandwidth(tau_s):
    """Bandwidth (Hz) associated with a Gaussian pulse of RMS intensity duration ``tau_s``.

    Uses the 1/(4*pi*tau_s) convention, which puts a 40 ns pulse at 2 MHz.
    """
    if not tau_s > 0:
        raise InvalidParameterError(f"tau_s must be positive, got {tau_s!r}")
    return 1.0 / (4.0 * math.pi * tau_s)


@dataclass(frozen=True)
class MediumParams:
    """Atomic-ensemble constants.

    Attributes
    ----------
    d0 : float
        On-resonance intensity optical density.
    gamma : float
        Ground-state coherence dephasing rate (rad/s).
    Gamma3, Gamma4 : float
        Population decay rates of the excited levels (rad/s).
    branch3 : float
        Fraction of the decay of level 3 that ends in ground level 1.
    """

    d0: float = 3.0
    gamma: float = TWO_PI * 75e3
    Gamma3: float = GAMMA_D2
    Gamma4: float = GAMMA_D2
    branch3: float = 0.5

    def __post_init__(self):
        if not self.d0 >= 0:
            raise InvalidParameterError(f"d0 must be >= 0, got {self.d0}")
        if not self.gamma >= 0:
            raise InvalidParameterError(f"gamma must be >= 0, got {self.gamma}")
        if not (self.Gamma3 > 0 and self.Gamma4 > 0):
            raise InvalidParameterError("excited-state decay rates must be positive")
        if not 0.0 <= self.branch3 <= 1.0:
            raise InvalidParameterError(f"branch3 must lie in [0, 1], got {self.branch3}")

    def with_(self, **changes) -> "MediumParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class FieldParams:
    """Rabi frequencies and detunings of the probe, coupling and signal fields (rad/s)."""

    omega_p: float
    omega_c: float
    delta_p: float = 0.0
    delta_2ph: float = 0.0
    delta_s: float = TWO_PI * 40e6

    def __post_init__(self):
        if not self.omega_p >= 0:
            raise InvalidParameterError(f"omega_p must be >= 0, got {self.omega_p}")
        if not self.omega_c >= 0:
            raise InvalidParameterError(f"omega_c must be >= 0, got {self.omega_c}")

    @property
    def delta_c(self) -> float:
        """Coupling one-photon detuning."""
        return self.delta_p - self.delta_2ph

    @property
    def weak_probe(self) -> bool:
        return self.omega_p < self.omega_c / 5.0

    def with_(self, **changes) -> "FieldParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SignalPulse:
    """Gaussian signal pulse; ``tau_s`` is the RMS duration of the intensity envelope."""

    tau_s: float
    n_ph: float
    t0: float = 0.0
    peak_power: Optional[float] = None
    wavelength: float = WAVELENGTH_D2

    def __post_init__(self):
        if not self.tau_s > 0:
            raise InvalidParameterError(f"tau_s must be positive, got {self.tau_s}")
        if not self.n_ph >= 0:
            raise InvalidParameterError(f"n_ph must be >= 0, got {self.n_ph}")
        if not self.wavelength > 0:
            raise InvalidParameterError("wavelength must be positive")
        if self.peak_power is not None:
            if self.peak_power < 0:
                raise InvalidParameterError("peak_power must be >= 0")
            expected = self.peak_power * self.tau_s * math.sqrt(TWO_PI)
            if not math.isclose(expected, self.energy, rel_tol=1e-6, abs_tol=1e-30):
                raise InvalidParameterError(
                    f"peak_power {self.peak_power:g} W inconsistent with n_ph={self.n_ph:g}"
                )

    @classmethod
    def from_energy(cls, energy, tau_s, t0=0.0, wavelength=WAVELENGTH_D2):
        return cls(tau_s=tau_s, n_ph=photon_number(energy, wavelength), t0=t0, wavelength=wavelength)

    @classmethod
    def from_peak_power(cls, peak_power, tau_s, t0=0.0, wavelength=WAVELENGTH_D2):
        energy = peak_power * tau_s * math.sqrt(TWO_PI)
        return cls(tau_s=tau_s, n_ph=photon_number(energy, wavelength), t0=t0, wavelength=wavelength)

    @property
    def energy(self) -> float:
        return self.n_ph * photon_energy(self.wavelength)

    @property
    def power_peak(self) -> float:
        """Peak power in W, derived from the photon number when not set explicitly."""
        if self.peak_power is not None:
            return self.peak_power
        return self.energy / (self.tau_s * math.sqrt(TWO_PI))

    def with_(self, **changes) -> "SignalPulse":
        if "peak_power" not in changes:
            changes["peak_power"] = None
        return replace(self, **changes)


@dataclass(frozen=True)
class SpectralWindow:
    """EIT transparency window; ``delta_eit`` is the FWHM in rad/s."""

    delta_eit: float

    def __post_init__(self):
        if not self.delta_eit > 0:
            raise InvalidParameterError(f"delta_eit must be positive, got {self.delta_eit}")

    @classmethod
    def from_hz(cls, fwhm_hz):
        return cls(to_angular(fwhm_hz))


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    dt: float
    n_samples: int

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParameterError(f"dt must be positive, got {self.dt}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise InvalidParameterError(f"n_samples must be an integer >= 2, got {self.n_samples}")
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @classmethod
    def spanning(cls, t_start, t_stop, dt):
        """Grid with step ``dt`` covering at least [t_start, t_stop]."""
        n = int(math.ceil((t_stop - t_start) / dt - 1e-9)) + 1
        return cls(t_start, dt, max(n, 2))

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_samples)

    @property
    def t_stop(self) -> float:
        return self.t_start + self.dt * (self.n_samples - 1)

    def shifted(self, offset) -> "TimeGrid":
        return replace(self, t_start=self.t_start + offset)


@dataclass
class PhaseTrace:
    """Uniformly sampled probe phase, with optional standard errors and transmission."""

    grid: TimeGrid
    phase: np.ndarray
    stderr: Optional[np.ndarray] = None
    transmission: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phase = np.asarray(self.phase, dtype=float)
        if self.phase.shape != (self.grid.n_samples,):
            raise InvalidParameterError(
                f"phase has shape {self.phase.shape}, grid has {self.grid.n_samples} samples"
            )
        if not np.all(np.isfinite(self.phase)):
            raise InvalidParameterError("phase samples must be finite")
        for name in ("stderr", "transmission"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != self.phase.shape:
                    raise InvalidParameterError(f"{name} shape does not match phase")
                setattr(self, name, arr)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __len__(self):
        return self.grid.n_samples


def gaussian_flux(t, pulse: SignalPulse):
    """Photon rate (1/s) of the Gaussian signal pulse; integrates to ``pulse.n_ph``."""
    t = np.asarray(t, dtype=float)
    x = (t - pulse.t0) / pulse.tau_s
    return pulse.n_ph / (math.sqrt(TWO_PI) * pulse.tau_s) * np.exp(-0.5 * x * x)
