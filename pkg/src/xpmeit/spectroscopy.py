"""Simulated calibration scans: EIT window width and AC Stark shift."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bloch
from .errors import InvalidParameterError, PreconditionError, ShapeError, XpmError
from .model import FieldParams, MediumParams, SpectralWindow


@dataclass(frozen=True)
class ScanCurve:
    detuning: np.ndarray
    transmission: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.detuning, dtype=float)
        if d.ndim != 1 or np.any(np.diff(d) <= 0):
            raise InvalidParameterError("detuning samples must be strictly increasing")
        object.__setattr__(self, "detuning", d)
        object.__setattr__(self, "transmission", np.asarray(self.transmission, dtype=float))
        object.__setattr__(self, "phase", np.asarray(self.phase, dtype=float))


def expected_window(medium: MediumParams, fields: FieldParams) -> float:
    """Thin-medium transparency FWHM, Omega_c^2/Gamma3 + 2 gamma (rad/s)."""
    return fields.omega_c**2 / medium.Gamma3 + 2.0 * medium.gamma


def coupling_for_window(delta_eit: float, medium: MediumParams) -> float:
    """Coupling Rabi frequency giving a thin-medium window of FWHM ``delta_eit``."""
    excess = delta_eit - 2.0 * medium.gamma
    if excess <= 0:
        raise InvalidParameterError("window must exceed twice the ground-state dephasing rate")
    return float(np.sqrt(medium.Gamma3 * excess))


def transmission_scan(
    medium: MediumParams,
    fields: FieldParams,
    omega_s_cw: float = 0.0,
    delta_range=None,
    n_points: int = 201,
    calib: Optional[bloch.ThinMediumCalibration] = None,
) -> ScanCurve:
    """Steady-state probe transmission and phase while the probe laser is scanned.

    The coupling laser stays fixed, so each point shifts the probe one-photon
    detuning and the two-photon detuning together. ``delta_range`` is a
    (low, high) pair of two-photon detunings in rad/s; the default spans five
    expected window widths either side of resonance.
    """
    if n_points < 51:
        raise PreconditionError("a scan needs at least 51 points")
    if delta_range is None:
        w = expected_window(medium, fields)
        delta_range = (-5.0 * w, 5.0 * w)
    lo, hi = delta_range
    deltas = np.linspace(lo, hi, n_points)
    calib = calib or bloch.calibrate_thin_medium(medium, fields)
    delta_c = fields.delta_c
    trans = np.empty(n_points)
    phase = np.empty(n_points)
    for i, d in enumerate(deltas):
        point = fields.with_(delta_p=delta_c + d, delta_2ph=d)
        try:
            rho = bloch.steady_state(medium, point, omega_s_cw)
        except XpmError as exc:
            raise type(exc)(f"at two-photon detuning {d:.6g} rad/s: {exc}") from exc
        phase[i], trans[i] = bloch.steady_probe(rho, calib, point)
    return ScanCurve(deltas, trans, phase)


def _parabolic_vertex(x, y, i):
    """Vertex abscissa of the parabola through points i-1, i, i+1."""
    if i <= 0 or i >= x.size - 1:
        return x[i]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0:
        return x[i]
    h = x[i + 1] - x[i]
    return x[i] + 0.5 * h * (y0 - y2) / denom


def _half_crossings(x, y, i_pk, level):
    left = np.nonzero(y[:i_pk] < level)[0]
    right = np.nonzero(y[i_pk:] < level)[0]
    if left.size == 0 or right.size == 0:
        raise ShapeError("no half-maximum crossings on both sides of the transparency peak")
    i = left[-1]
    xl = x[i] + (level - y[i]) / (y[i + 1] - y[i]) * (x[i + 1] - x[i])
    j = i_pk + right[0]
    xr = x[j - 1] + (y[j - 1] - level) / (y[j - 1] - y[j]) * (x[j] - x[j - 1])
    return xl, xr


def _far_floor(x, y, center, width):
    """Asymptotic level of the wings, from a fit of c0 + c2/x^2 + c4/x^4 beyond 1.5 widths."""
    u = (x - center) / width
    mask = np.abs(u) > 1.5
    if np.count_nonzero(mask) < 6:
        return None
    inv2 = 1.0 / u[mask] ** 2
    basis = np.column_stack([np.ones(inv2.size), inv2, inv2**2])
    coef, *_ = np.linalg.lstsq(basis, y[mask], rcond=None)
    resid = y[mask] - basis @ coef
    span = np.ptp(y)
    if np.sqrt(np.mean(resid**2)) > 1e-3 * span:
        return None
    return float(coef[0])


def window_fwhm(curve: ScanCurve) -> SpectralWindow:
    """FWHM of the transparency peak measured above the absorption floor."""
    x, y = curve.detuning, curve.transmission
    i_pk = int(np.argmax(y))
    if i_pk in (0, x.size - 1) or np.ptp(y) == 0:
        raise ShapeError("no interior transparency peak in the scan")
    peak = y[i_pk]
    floor = float(np.min(y))
    xl, xr = _half_crossings(x, y, i_pk, floor + 0.5 * (peak - floor))
    far = _far_floor(x, y, _parabolic_vertex(x, y, i_pk), xr - xl)
    if far is not None and far < peak:
        floor = far
        xl, xr = _half_crossings(x, y, i_pk, floor + 0.5 * (peak - floor))
    return SpectralWindow(xr - xl)


def transparency_center(curve: ScanCurve) -> float:
    i = int(np.argmax(curve.transmission))
    return float(_parabolic_vertex(curve.detuning, curve.transmission, i))


def _locate_center(medium, fields, omega_s, guess, width, calib, n_points):
    coarse = transmission_scan(medium, fields, omega_s, (guess - 5 * width, guess + 5 * width), n_points, calib)
    c = transparency_center(coarse)
    step = coarse.detuning[1] - coarse.detuning[0]
    fine = transmission_scan(medium, fields, omega_s, (c - 3 * step, c + 3 * step), 61, calib)
    return transparency_center(fine)


def stark_shift(
    medium: MediumParams,
    fields: FieldParams,
    omega_s_cw: float,
    n_points: int = 201,
) -> float:
    """Displacement (rad/s) of the two-photon transparency centre caused by a CW signal."""
    if omega_s_cw == 0:
        return 0.0
    if abs(fields.delta_s) < 5.0 * abs(omega_s_cw):
        raise PreconditionError("AC Stark measurement requires |delta_s| >= 5 |Omega_s|")
    calib = bloch.calibrate_thin_medium(medium, fields)
    width = expected_window(medium, fields)
    guess = omega_s_cw**2 / (4.0 * fields.delta_s)
    shifted = _locate_center(medium, fields, omega_s_cw, guess, width, calib, n_points)
    bare = _locate_center(medium, fields, 0.0, 0.0, width, calib, n_points)
    return shifted - bare
