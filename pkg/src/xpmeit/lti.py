"""Linear time-invariant model of EIT-enhanced cross-phase modulation.

The probe phase is the output of a causal linear filter driven by the signal
photon flux. The impulse response is ``(phi0/tau) * exp(-t/tau)`` for
``t >= 0``; for a Gaussian drive the convolution has the closed form
implemented in :func:`phase_profile`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal, special

from .errors import DomainError, GridWarning, InvalidParameterError
from .model import MediumParams, PhaseTrace, SignalPulse, SpectralWindow, TimeGrid, gaussian_flux

SQRT2 = math.sqrt(2.0)
#: 10-90 % rise interval of an erf edge, in units of its Gaussian RMS width.
ERF_RISE_10_90 = 2.0 * SQRT2 * special.erfinv(0.8)


@dataclass(frozen=True)
class LtiKernel:
    """Exponential impulse response: integrated phase per photon ``phi0`` (rad s) and decay ``tau`` (s)."""

    phi0: float
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")
        if not math.isfinite(self.phi0):
            raise InvalidParameterError("phi0 must be finite")

    def impulse_response(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.phi0 / self.tau * np.exp(-np.clip(t, 0, None) / self.tau), 0.0)


@dataclass(frozen=True)
class XpmSummary:
    peak_phase: float
    integrated_phase: float
    rise_time: float
    fall_time: float
    peak_time: float = 0.0


def response_time(window: SpectralWindow, medium: MediumParams) -> float:
    """Decay constant of the EIT medium's phase response.

    ``tau = [1 + d0/4 (1 - 2 gamma/Delta)] * 2/Delta`` with Delta the window
    FWHM, all in angular units.
    """
    delta = window.delta_eit
    if delta <= 2.0 * medium.gamma:
        raise DomainError(
            f"window narrower than dephasing limit: delta_eit={delta:g} <= 2*gamma={2 * medium.gamma:g}"
        )
    return (1.0 + 0.25 * medium.d0 * (1.0 - 2.0 * medium.gamma / delta)) * 2.0 / delta


def integrated_phase_per_photon(window: SpectralWindow, medium: MediumParams, coupling_const: float) -> float:
    """Dephasing-limited integrated phase per photon, ``C/Delta * (1 - 2 gamma/Delta)``.

    The maximum over Delta sits at ``4 gamma``. Values below ``2 gamma`` come out
    negative and mark the unphysical regime.
    """
    delta = window.delta_eit
    return coupling_const / delta * (1.0 - 2.0 * medium.gamma / delta)


def _shape(x, tau_s, tau):
    """exp(tau_s^2/2tau^2 - x/tau) * (1 + erf(u)), evaluated without overflow."""
    x = np.asarray(x, dtype=float)
    u = x / (SQRT2 * tau_s) - tau_s / (SQRT2 * tau)
    out = np.empty_like(u)
    neg = u < 0
    # exponent - u^2 collapses to -x^2/(2 tau_s^2); erfcx absorbs the rest
    xn = x[neg]
    out[neg] = np.exp(-0.5 * (xn / tau_s) ** 2) * special.erfcx(-u[neg])
    xp = x[~neg]
    out[~neg] = np.exp(0.5 * (tau_s / tau) ** 2 - xp / tau) * special.erfc(-u[~neg])
    return out


def phase_profile(t, kernel: LtiKernel, pulse: SignalPulse):
    """Closed-form phase response to a Gaussian signal pulse."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    shape = _shape(np.atleast_1d(t) - pulse.t0, pulse.tau_s, kernel.tau)
    out = kernel.phi0 * pulse.n_ph / (2.0 * kernel.tau) * shape
    return float(out[0]) if scalar else out


def _cubic_weights(dt, tau, n_nodes=12):
    """Weights w[j] with int_0^dt exp(-s/tau) f(t_{k+1}-s) ds ~= sum_j w[j] f[k-1+j].

    ``f`` is replaced by the cubic through samples k-1..k+2; the exponential
    factor is integrated exactly by Gauss-Legendre on the interval.
    """
    x, wq = np.polynomial.legendre.leggauss(n_nodes)
    s = 0.5 * dt * (x + 1.0)
    wq = 0.5 * dt * wq
    # node positions relative to t_k, in units of dt: sample k-1+j sits at j-1
    pos = 1.0 - s / dt
    nodes = np.array([-1.0, 0.0, 1.0, 2.0])
    weights = np.empty(4)
    for j in range(4):
        others = np.delete(nodes, j)
        lag = np.prod([(pos - o) / (nodes[j] - o) for o in others], axis=0)
        weights[j] = np.sum(wq * np.exp(-s / tau) * lag)
    return weights


def phase_profile_numeric(kernel: LtiKernel, flux, grid: TimeGrid, feature_time=None) -> PhaseTrace:
    """Causal convolution of a sampled photon-rate series with the exponential kernel.

    The flux is assumed zero before ``grid.t_start``. The recursion integrates
    the kernel exactly against a piecewise-cubic interpolant of the flux, so
    the error falls off as ``dt**4``. ``feature_time`` is the shortest time
    scale of the drive (e.g. the pulse RMS width); the grid should resolve both
    it and ``kernel.tau`` with at least 20 samples, otherwise a
    :class:`GridWarning` is issued and recorded in ``meta``.
    """
    flux = np.asarray(flux, dtype=float)
    if flux.shape != (grid.n_samples,):
        raise InvalidParameterError("flux must have one sample per grid point")
    meta = {}
    limit = kernel.tau if feature_time is None else min(kernel.tau, feature_time)
    if grid.dt > limit / 20.0:
        msg = f"grid step {grid.dt:g} s exceeds 1/20 of the shortest time scale {limit:g} s"
        meta["accuracy_warning"] = msg
        warnings.warn(msg, GridWarning, stacklevel=2)

    decay = math.exp(-grid.dt / kernel.tau)
    w = _cubic_weights(grid.dt, kernel.tau)
    padded = np.concatenate(([flux[0]], flux, [flux[-1], flux[-1]]))
    # drive[k] collects the contribution of interval [t_k, t_k+1]
    drive = np.convolve(padded, w[::-1], mode="valid")[: grid.n_samples - 1]
    y = np.zeros(grid.n_samples)
    y[1:] = signal.lfilter([1.0], [1.0, -decay], drive)
    phase = kernel.phi0 / kernel.tau * y
    return PhaseTrace(grid, phase, meta=meta)


def _rise_interval(t, y):
    """10-90 % crossing interval of the leading edge of ``y`` (linear interpolation)."""
    peak_i = int(np.argmax(y))
    peak = y[peak_i]
    lead = y[: peak_i + 1]

    def crossing(level):
        below = np.nonzero(lead < level)[0]
        if below.size == 0:
            return t[0]
        i = below[-1]
        if i + 1 > peak_i:
            return t[peak_i]
        y0, y1 = lead[i], lead[i + 1]
        return t[i] + (level - y0) / (y1 - y0) * (t[i + 1] - t[i])

    return crossing(0.1 * peak), crossing(0.9 * peak)


def summarize(kernel: LtiKernel, pulse: SignalPulse, n_grid: int = 2000) -> XpmSummary:
    """Peak and integrated phase, rise and fall times of the closed-form profile."""
    if pulse.n_ph == 0 or kernel.phi0 == 0:
        return XpmSummary(0.0, 0.0, 0.0, kernel.tau, pulse.t0)
    sign = math.copysign(1.0, kernel.phi0)
    t = np.linspace(pulse.t0 - 5 * pulse.tau_s, pulse.t0 + 10 * kernel.tau + 5 * pulse.tau_s, n_grid)
    y = sign * phase_profile(t, kernel, pulse)
    i = int(np.argmax(y))
    i = min(max(i, 1), n_grid - 2)
    res = optimize.minimize_scalar(
        lambda s: -sign * phase_profile(s, kernel, pulse),
        bracket=(t[i - 1], t[i], t[i + 1]),
        method="golden",
        options={"xtol": 1e-10},
    )
    t_peak = float(res.x)
    peak = phase_profile(t_peak, kernel, pulse)
    # densify the leading edge so the 10-90 % interval is well resolved
    te = np.linspace(pulse.t0 - 6 * pulse.tau_s, t_peak, n_grid)
    t10, t90 = _rise_interval(te, sign * phase_profile(te, kernel, pulse))
    return XpmSummary(
        peak_phase=float(peak),
        integrated_phase=kernel.phi0 * pulse.n_ph,
        rise_time=(t90 - t10) / ERF_RISE_10_90,
        fall_time=kernel.tau,
        peak_time=t_peak,
    )


def pulse_flux_trace(pulse: SignalPulse, grid: TimeGrid) -> np.ndarray:
    return gaussian_flux(grid.times, pulse)
