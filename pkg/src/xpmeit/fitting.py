"""Levenberg-Marquardt fits of the LTI phase profile to measured traces."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import BaselineWarning, FlatTraceError, NotConvergedError, PreconditionError
from .lti import ERF_RISE_10_90, _shape
from .model import PhaseTrace

PARAM_NAMES = ("amplitude", "tau_s", "tau", "t0", "baseline")
MAX_ITERATIONS = 500
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class FitParams(NamedTuple):
    amplitude: float
    tau_s: float
    tau: float
    t0: float
    baseline: float


class RiseFall(NamedTuple):
    rise: float
    fall: float
    rise_err: float
    fall_err: float


@dataclass
class FitResult:
    amplitude: float
    tau_s: float
    tau: float
    t0: float
    baseline: float
    covariance: np.ndarray
    residual_rms: float
    converged: bool
    n_iterations: int
    fall_1e: float = float("nan")
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def params(self) -> FitParams:
        return FitParams(self.amplitude, self.tau_s, self.tau, self.t0, self.baseline)

    @property
    def errors(self) -> FitParams:
        return FitParams(*np.sqrt(np.clip(np.diag(self.covariance), 0.0, None)))

    def model(self, t):
        return profile_model(t, self.params)


def profile_model(t, p):
    """baseline + LTI phase profile with integrated area ``amplitude``."""
    amplitude, tau_s, tau, t0, baseline = p
    return baseline + amplitude / (2.0 * tau) * _shape(np.asarray(t, dtype=float) - t0, tau_s, tau)


def profile_jacobian(t, p):
    """Analytic partial derivatives of :func:`profile_model`, shape (n, 5)."""
    amplitude, tau_s, tau, t0, _ = p
    x = np.asarray(t, dtype=float) - t0
    shape = _shape(x, tau_s, tau)
    gauss = _SQRT_2_OVER_PI * np.exp(-0.5 * (x / tau_s) ** 2)
    d_dx = -shape / tau + gauss / tau_s
    d_dtau_s = shape * tau_s / tau**2 - gauss * (x / tau_s**2 + 1.0 / tau)
    d_dtau = shape * (x / tau**2 - tau_s**2 / tau**3) + gauss * tau_s / tau**2
    k = amplitude / (2.0 * tau)
    jac = np.empty((x.size, 5))
    jac[:, 0] = shape / (2.0 * tau)
    jac[:, 1] = k * d_dtau_s
    jac[:, 2] = k * d_dtau - k / tau * shape
    jac[:, 3] = -k * d_dx
    jac[:, 4] = 1.0
    return jac


def _crossing_before(t, y, stop, level):
    """Time where ``y`` last rises through ``level`` before index ``stop``."""
    below = np.nonzero(y[: stop + 1] < level)[0]
    if below.size == 0:
        return t[0]
    i = below[-1]
    if i >= stop:
        return t[stop]
    return t[i] + (level - y[i]) / (y[i + 1] - y[i]) * (t[i + 1] - t[i])


def _crossing_after(t, y, start, level):
    below = np.nonzero(y[start:] <= level)[0]
    if below.size == 0:
        return float("nan")
    i = start + below[0]
    if i == start:
        return t[i]
    return t[i - 1] + (y[i - 1] - level) / (y[i - 1] - y[i]) * (t[i] - t[i - 1])


def _orientation(y):
    med = np.median(y)
    return 1.0 if (y.max() - med) >= (med - y.min()) else -1.0


def initial_guess(trace: PhaseTrace) -> FitParams:
    """Starting point for :func:`fit_phase_profile` read off the trace shape."""
    t = trace.times
    y = trace.phase
    if np.ptp(y) == 0:
        raise FlatTraceError("trace is flat; nothing to fit")
    sign = _orientation(y)
    ys = sign * y
    dt = trace.grid.dt
    i_pk = int(np.argmax(ys))

    def edges(base):
        height = ys[i_pk] - base
        t10 = _crossing_before(t, ys, i_pk, base + 0.1 * height)
        t90 = _crossing_before(t, ys, i_pk, base + 0.9 * height)
        return t10, t90

    t10, t90 = edges(ys[0])
    rise = max(t90 - t10, dt)
    pre = t < t10 - rise
    if np.count_nonzero(pre) >= 5:
        base = float(np.mean(ys[pre]))
        t10, t90 = edges(base)
        rise = max(t90 - t10, dt)
    else:
        warnings.warn("fewer than 5 pre-pulse bins; baseline initialised to 0", BaselineWarning, stacklevel=2)
        base = 0.0
    height = ys[i_pk] - base
    tau_s = max(rise / ERF_RISE_10_90, 0.5 * dt)
    t0 = t[i_pk] - dt

    tail = np.arange(i_pk + 1, t.size)
    rel = (ys[tail] - base) / height
    sel = tail[(rel <= 0.6) & (rel > 0.05)]
    tau = float("nan")
    if sel.size >= 3:
        slope = np.polyfit(t[sel], np.log((ys[sel] - base) / height), 1)[0]
        if slope < 0:
            tau = -1.0 / slope
    if not (math.isfinite(tau) and tau > 0):
        tau = max((t[-1] - t[i_pk]) / 3.0, dt)
    area = float(np.trapezoid(ys - base, t))
    if area <= 0:
        area = height * (tau + tau_s)
    return FitParams(sign * area, tau_s, tau, t0, sign * base)


def _scales(p, y):
    amp, tau_s, tau, _, _ = p
    return np.array([abs(amp), tau_s, tau, tau_s, max(np.ptp(y), 1e-300)])


def fit_phase_profile(
    trace: PhaseTrace,
    weights: Optional[np.ndarray] = None,
    init=None,
) -> FitResult:
    """Weighted least-squares fit of baseline + LTI profile.

    ``weights`` multiply the residuals (1/sigma). When omitted, the trace's
    per-bin standard errors are used if present and positive, otherwise
    uniform weights.
    """
    t = trace.times
    y = trace.phase
    n = y.size
    if n < 30:
        raise PreconditionError(f"need at least 30 bins to fit, got {n}")
    if np.ptp(y) <= 1e-14 * max(np.max(np.abs(y)), 1e-300) or np.ptp(y) == 0:
        raise FlatTraceError("trace is flat; nothing to fit")
    if weights is None:
        if trace.stderr is not None and np.all(trace.stderr > 0):
            weights = 1.0 / trace.stderr
        else:
            weights = np.ones(n)
    weights = np.asarray(weights, dtype=float)

    p = np.array(initial_guess(trace) if init is None else init, dtype=float)
    scales = _scales(p, y)

    def residuals(q):
        return weights * (y - profile_model(t, q))

    r = residuals(p)
    cost = 0.5 * float(r @ r)
    jac = weights[:, None] * profile_jacobian(t, p)
    lam = 1e-3
    converged = False
    message = "maximum iterations reached"
    iteration = 0
    while iteration < MAX_ITERATIONS:
        iteration += 1
        a = jac.T @ jac
        g = jac.T @ r
        d = np.sqrt(np.maximum(np.diag(a), 1e-300))
        a_s = a / np.outer(d, d)
        step = np.linalg.solve(a_s + lam * np.eye(5), g / d) / d
        trial = p + step
        if trial[1] > 0 and trial[2] > 0:
            r_new = residuals(trial)
            cost_new = 0.5 * float(r_new @ r_new)
        else:
            cost_new = math.inf
        if cost_new < cost:
            rel_change = (cost - cost_new) / cost if cost > 0 else 0.0
            p, r, cost = trial, r_new, cost_new
            jac = weights[:, None] * profile_jacobian(t, p)
            lam /= 3.0
            if rel_change < 1e-10:
                converged, message = True, "relative cost change below 1e-10"
                break
            if np.max(np.abs(step) / scales) < 1e-12:
                converged, message = True, "step norm below 1e-12"
                break
            if cost == 0.0:
                converged, message = True, "exact fit"
                break
        else:
            lam *= 10.0
            if np.max(np.abs(step) / scales) < 1e-12:
                converged, message = True, "step norm below 1e-12"
                break
            if lam > 1e16:
                # no descent direction left at machine precision
                converged, message = True, "damping saturated at a minimum"
                break

    a = jac.T @ jac
    dof = max(n - 5, 1)
    try:
        cov = np.linalg.inv(a) * (2.0 * cost / dof)
    except np.linalg.LinAlgError:
        cov = np.full((5, 5), np.nan)
    cov = 0.5 * (cov + cov.T)
    model = profile_model(t, p)
    resid = y - model
    result = FitResult(
        *p,
        covariance=cov,
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        converged=converged and p[1] > 0 and p[2] > 0,
        n_iterations=iteration,
        message=message,
    )
    result.fall_1e = direct_decay_time(trace, result)
    return result


def direct_decay_time(trace: PhaseTrace, fit: FitResult) -> float:
    """Time from the trace maximum until the baseline-corrected trace falls by 1/e."""
    t = trace.times
    ys = trace.phase - fit.baseline
    sign = 1.0 if fit.amplitude >= 0 else -1.0
    ys = sign * ys
    i_pk = int(np.argmax(ys))
    t_cross = _crossing_after(t, ys, i_pk, ys[i_pk] / math.e)
    return t_cross - t[i_pk]


def rise_fall_times(fit: FitResult) -> RiseFall:
    """Fitted rise (tau_s) and fall (tau) times with 1-sigma errors."""
    if not fit.converged:
        raise NotConvergedError(f"fit did not converge: {fit.message}")
    err = fit.errors
    return RiseFall(fit.tau_s, fit.tau, err.tau_s, err.tau)
