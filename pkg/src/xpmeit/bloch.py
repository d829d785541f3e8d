"""Four-level N-scheme master equation.

Levels: 0 = |1> (F=2 ground), 1 = |2> (F=3 ground), 2 = |3> (F'=2),
3 = |4> (F'=4). The probe drives 1-3, the coupling 2-3 and the signal 2-4,
all in the rotating-wave approximation with a frame rotating at the three
carrier frequencies. Density matrices are vectorised row-major, so
``vec(A rho B) = kron(A, B.T) @ vec(rho)``.

Phases are reported in the e^{+i omega t} convention used by the beat-note
readout: a blue-detuned signal raises level |2>, pulls the probe below the
shifted two-photon resonance and gives a positive phase excursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import AccuracyError, CalibrationError, PreconditionError, SolverError, StiffnessError
from .model import FieldParams, MediumParams, PhaseTrace, SignalPulse, TimeGrid

#: Signal Rabi frequency per sqrt(peak power), rad/s/sqrt(W). Chosen so that a
#: 0.8 uW, 40 ns pulse on a 0.38 MHz window gives tens of mrad of phase.
SIGNAL_RABI_PER_SQRT_WATT = 1.73e10

DIM = 4
_I4 = np.eye(DIM)


def _ket(i):
    v = np.zeros(DIM)
    v[i] = 1.0
    return v


def _op(i, j):
    """|i><j|"""
    return np.outer(_ket(i), _ket(j)).astype(complex)


def _commutator_super(h):
    return -1j * (np.kron(h, _I4) - np.kron(_I4, h.T))


def _dissipator_super(c):
    cdc = c.conj().T @ c
    return np.kron(c, c.conj()) - 0.5 * (np.kron(cdc, _I4) + np.kron(_I4, cdc.T))


def collapse_operators(medium: MediumParams):
    ops = [
        math.sqrt(medium.Gamma3 * medium.branch3) * _op(0, 2),
        math.sqrt(medium.Gamma3 * (1.0 - medium.branch3)) * _op(1, 2),
        math.sqrt(medium.Gamma4) * _op(1, 3),
        # damps rho_12 at rate gamma
        math.sqrt(medium.gamma / 2.0) * (_op(0, 0) - _op(1, 1)),
    ]
    return [c for c in ops if np.any(c)]


def dissipator(medium: MediumParams) -> np.ndarray:
    out = np.zeros((DIM * DIM, DIM * DIM), dtype=complex)
    for c in collapse_operators(medium):
        out += _dissipator_super(c)
    return out


def hamiltonian(fields: FieldParams, omega_s=0.0, probe: Optional[complex] = None) -> np.ndarray:
    """Rotating-frame Hamiltonian (hbar = 1). ``probe`` overrides ``fields.omega_p`` (may be complex)."""
    op = fields.omega_p if probe is None else probe
    h = np.diag([0.0, -fields.delta_2ph, -fields.delta_p, -fields.delta_2ph - fields.delta_s]).astype(complex)
    h += -0.5 * (op * _op(2, 0) + np.conj(op) * _op(0, 2))
    h += -0.5 * fields.omega_c * (_op(2, 1) + _op(1, 2))
    h += -0.5 * omega_s * (_op(3, 1) + _op(1, 3))
    return h


def liouvillian(medium: MediumParams, fields: FieldParams, omega_s=0.0, probe=None) -> np.ndarray:
    return _commutator_super(hamiltonian(fields, omega_s, probe)) + dissipator(medium)


def _signal_super():
    return _commutator_super(-0.5 * (_op(3, 1) + _op(1, 3)))


def _hermitian_basis():
    """Columns map real coordinates (populations, Re/Im of upper coherences) to vec(rho)."""
    cols = [_op(i, i).reshape(-1) for i in range(DIM)]
    for i in range(DIM):
        for j in range(i + 1, DIM):
            cols.append((_op(i, j) + _op(j, i)).reshape(-1))
            cols.append((1j * _op(i, j) - 1j * _op(j, i)).reshape(-1))
    return np.array(cols).T


_TO_VEC = _hermitian_basis()
_FROM_VEC = np.linalg.inv(_TO_VEC)


def to_real(super_op):
    """Real form of a Hermiticity-preserving superoperator in the Hermitian coordinate basis."""
    out = _FROM_VEC @ super_op @ _TO_VEC
    return out.real


def rho_to_real(rho):
    return (_FROM_VEC @ np.asarray(rho).reshape(-1)).real


def real_to_rho(x):
    """x: (..., 16) -> (..., 4, 4)"""
    x = np.asarray(x)
    return (x @ _TO_VEC.T).reshape(*x.shape[:-1], DIM, DIM)


@dataclass(frozen=True)
class DensityMatrix4:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (DIM, DIM):
            raise ValueError(f"density matrix must be 4x4, got {rho.shape}")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def ground(cls, level=0):
        return cls(_op(level, level))

    @property
    def vec(self):
        return self.rho.reshape(-1)

    def trace_error(self):
        return abs(np.trace(self.rho) - 1.0)

    def hermiticity_error(self):
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self):
        return float(np.min(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))))

    def __getitem__(self, idx):
        return self.rho[idx]


@dataclass
class CoherenceTrace:
    """rho_31 (and rho_21) on a time grid, plus invariant diagnostics from every accepted step."""

    grid: TimeGrid
    rho31: np.ndarray
    rho21: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def times(self):
        return self.grid.times


@dataclass(frozen=True)
class ThinMediumCalibration:
    """Maps the normalised response ``chi = norm_rate * rho31 / omega_p`` to field phase and log amplitude."""

    scale: float
    norm_rate: float


def signal_rabi_peak(pulse: SignalPulse, rabi_per_sqrt_watt=SIGNAL_RABI_PER_SQRT_WATT) -> float:
    return rabi_per_sqrt_watt * math.sqrt(pulse.power_peak)


def signal_envelope(t, pulse: SignalPulse, omega_peak):
    """Rabi amplitude envelope whose square has RMS width ``tau_s``."""
    x = (np.asarray(t, dtype=float) - pulse.t0) / pulse.tau_s
    return omega_peak * np.exp(-0.25 * x * x)


def _null_space_state(lv, initial: Optional[DensityMatrix4]):
    u, s, vh = np.linalg.svd(lv)
    smax = s[0]
    zero = s < 1e-11 * smax
    k = int(np.count_nonzero(zero))
    if k == 0:
        raise SolverError(
            f"Liouvillian has no null space (smallest singular value {s[-1]:.3e})",
            condition=smax / s[-1],
        )
    nonzero = s[~zero]
    cond = smax / nonzero[-1]
    if cond > 1e9:
        raise SolverError(
            f"steady-state system is ill-conditioned (condition estimate {cond:.3e})", condition=cond
        )
    if k == 1:
        vec = vh[-1].conj()
        rho = vec.reshape(DIM, DIM)
        rho = rho / np.trace(rho)
    else:
        # degenerate: long-time limit of the given initial state
        r = vh[-k:].conj().T
        lf = u[:, -k:]
        rho0 = (initial or DensityMatrix4.ground(0)).vec
        coeffs = np.linalg.solve(lf.conj().T @ r, lf.conj().T @ rho0)
        rho = (r @ coeffs).reshape(DIM, DIM)
        rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    return rho


def steady_state(
    medium: MediumParams,
    fields: FieldParams,
    omega_s_cw: float = 0.0,
    *,
    probe=None,
    initial: Optional[DensityMatrix4] = None,
    check_weak_probe: bool = True,
) -> DensityMatrix4:
    """Stationary state of the master equation for constant drives.

    When the stationary state is not unique (e.g. no coupling and a closed
    probe transition) the long-time limit reached from ``initial`` (default:
    all population in |1>) is returned.
    """
    if check_weak_probe and fields.omega_c > 0 and not fields.weak_probe:
        raise PreconditionError("weak-probe regime requires omega_p < omega_c/5")
    lv = liouvillian(medium, fields, omega_s_cw, probe)
    return DensityMatrix4(_null_space_state(lv, initial))


def _check_grid(medium, fields, grid):
    fastest = max(medium.Gamma3, medium.Gamma4, abs(fields.delta_s), fields.omega_c)
    if grid.dt > 0.05 / fastest:
        raise PreconditionError(
            f"grid step {grid.dt:g} s does not resolve the fastest rate {fastest:g} rad/s "
            f"(need dt <= {0.05 / fastest:g} s)"
        )


def _solve(fun, t_span, y0, jac, rtol, atol, method, first_step=None, max_step=np.inf):
    options = {"jac": jac} if method in ("Radau", "BDF", "LSODA") else {}
    sol = solve_ivp(
        fun,
        t_span,
        y0,
        method=method,
        rtol=rtol,
        atol=atol,
        dense_output=True,
        first_step=first_step,
        max_step=max_step,
        **options,
    )
    if sol.status != 0:
        raise StiffnessError(
            f"integration failed ({sol.message}); loosen rtol/atol or shorten the time grid"
        )
    return sol


class _Piecewise:
    """Chains solve_ivp runs over consecutive segments so the step size never skips the pulse."""

    def __init__(self, sols):
        self.sols = sols
        self.y = np.concatenate([s.y for s in sols], axis=1)

    def __call__(self, times):
        out = np.empty((self.y.shape[0], times.size))
        for k, s in enumerate(self.sols):
            lo, hi = s.t[0], s.t[-1]
            mask = (times >= lo) & ((times < hi) if k < len(self.sols) - 1 else (times <= hi))
            if np.any(mask):
                out[:, mask] = s.sol(times[mask])
        return out


def _solve_around_pulse(fun, grid, y0, jac, rtol, atol, method, pulse, first_step=None):
    lo, hi = pulse.t0 - 8.0 * pulse.tau_s, pulse.t0 + 8.0 * pulse.tau_s
    edges = [grid.t_start] + [e for e in (lo, hi) if grid.t_start < e < grid.t_stop] + [grid.t_stop]
    sols = []
    y = y0
    for a, b in zip(edges[:-1], edges[1:]):
        in_pulse = a >= lo - 1e-15 and b <= hi + 1e-15
        sol = _solve(
            fun, (a, b), y, jac, rtol, atol, method,
            first_step=first_step, max_step=pulse.tau_s / 4.0 if in_pulse else np.inf,
        )
        sols.append(sol)
        y = sol.y[:, -1]
    return _Piecewise(sols)


def _state_diagnostics(states):
    """states: (n_steps, 4, 4)"""
    tr = np.abs(np.trace(states, axis1=-2, axis2=-1) - 1.0)
    herm = np.max(np.abs(states - np.conj(np.swapaxes(states, -1, -2))), axis=(-2, -1))
    eig = np.linalg.eigvalsh(0.5 * (states + np.conj(np.swapaxes(states, -1, -2))))
    return {
        "n_steps": int(states.shape[0]),
        "max_trace_error": float(tr.max()),
        "max_hermiticity_error": float(herm.max()),
        "min_eigenvalue": float(eig.min()),
    }


def _dense_eval(sol, times, chunk=4096):
    out = []
    for i in range(0, times.size, chunk):
        out.append(sol(times[i : i + chunk]))
    return np.concatenate(out, axis=1)


def evolve(
    medium: MediumParams,
    fields: FieldParams,
    pulse: SignalPulse,
    grid: TimeGrid,
    initial: Optional[DensityMatrix4] = None,
    *,
    rabi_per_sqrt_watt: float = SIGNAL_RABI_PER_SQRT_WATT,
    omega_s_peak: Optional[float] = None,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    method: str = "Radau",
    check_grid: bool = True,
) -> CoherenceTrace:
    """Integrate the master equation through a Gaussian signal pulse.

    ``initial`` defaults to the signal-free steady state.
    """
    if check_grid:
        _check_grid(medium, fields, grid)
    if initial is None:
        initial = steady_state(medium, fields)
    peak = signal_rabi_peak(pulse, rabi_per_sqrt_watt) if omega_s_peak is None else omega_s_peak
    l0 = to_real(liouvillian(medium, fields))
    ls = to_real(_signal_super())

    if peak == 0.0:
        def fun(t, y):
            return l0 @ y

        def jac(t, y):
            return l0
    else:
        def fun(t, y):
            return (l0 + signal_envelope(t, pulse, peak) * ls) @ y

        def jac(t, y):
            return l0 + signal_envelope(t, pulse, peak) * ls

    sol = _solve_around_pulse(fun, grid, rho_to_real(initial.rho), jac, rtol, atol, method, pulse)
    diag = _state_diagnostics(real_to_rho(sol.y.T))
    rho = real_to_rho(_dense_eval(sol, grid.times).T)
    return CoherenceTrace(grid, rho31=rho[:, 2, 0].copy(), rho21=rho[:, 1, 0].copy(), diagnostics=diag)


def calibrate_thin_medium(medium: MediumParams, fields: FieldParams) -> ThinMediumCalibration:
    """Scale such that the bare, closed, resonant two-level probe transition transmits exp(-d0)."""
    bare_medium = medium.with_(branch3=1.0)
    bare = fields.with_(omega_c=0.0, delta_p=0.0, delta_2ph=0.0)
    rho = steady_state(bare_medium, bare, 0.0, check_weak_probe=False)
    if fields.omega_p == 0:
        raise CalibrationError("probe Rabi frequency is zero; no absorptive response")
    chi = medium.Gamma3 * rho[2, 0] / fields.omega_p
    if not abs(chi.imag) > 1e-12:
        raise CalibrationError("zero absorptive response in the bare two-level configuration")
    # intensity transmission exp(-2 A Im chi) = exp(-d0)
    return ThinMediumCalibration(scale=medium.d0 / (2.0 * chi.imag), norm_rate=medium.Gamma3)


def normalized_response(rho31, calib: ThinMediumCalibration, fields: FieldParams):
    return calib.norm_rate * np.asarray(rho31) / fields.omega_p


def probe_response(trace: CoherenceTrace, calib: ThinMediumCalibration, fields: FieldParams) -> PhaseTrace:
    """Thin-medium probe phase and intensity transmission from the probe coherence."""
    chi = normalized_response(trace.rho31, calib, fields)
    phase = -calib.scale * chi.real
    transmission = np.exp(-2.0 * calib.scale * chi.imag)
    return PhaseTrace(trace.grid, phase, transmission=transmission, meta={"engine": "bloch"})


def steady_probe(rho: DensityMatrix4, calib: ThinMediumCalibration, fields: FieldParams):
    """(phase, intensity transmission) for a single steady state."""
    chi = normalized_response(rho[2, 0], calib, fields)
    return float(-calib.scale * chi.real), float(np.exp(-2.0 * calib.scale * chi.imag))


# real coordinates of rho_13 = a + ib, so rho_31 = a - ib
_RE13, _IM13 = 6, 7


def propagate_slabs(
    medium: MediumParams,
    fields: FieldParams,
    pulse: SignalPulse,
    grid: TimeGrid,
    n_slabs: int,
    *,
    rabi_per_sqrt_watt: float = SIGNAL_RABI_PER_SQRT_WATT,
    omega_s_peak: Optional[float] = None,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    method: str = "DOP853",
) -> PhaseTrace:
    """Probe phase at the exit of a medium cut into ``n_slabs`` thin slices.

    Each slice carries OD ``d0/n_slabs`` and is driven by the probe field
    leaving the previous slice at the same instant (no retardation, signal
    undepleted). All slices are integrated together as one ODE system.
    """
    if n_slabs < 1:
        raise PreconditionError("n_slabs must be >= 1")
    if medium.d0 / n_slabs > 0.5:
        raise AccuracyError(
            f"per-slab OD {medium.d0 / n_slabs:g} > 0.5; use at least {math.ceil(2 * medium.d0)} slabs"
        )
    calib = calibrate_thin_medium(medium, fields)
    slab_scale = calib.scale / n_slabs
    g3 = medium.Gamma3
    peak = signal_rabi_peak(pulse, rabi_per_sqrt_watt) if omega_s_peak is None else omega_s_peak

    l_base = to_real(liouvillian(medium, fields.with_(omega_p=0.0)))
    l_sig = to_real(_signal_super())
    l_pre = to_real(_commutator_super(-0.5 * (_op(2, 0) + _op(0, 2))))
    l_pim = to_real(_commutator_super(-0.5 * (1j * _op(2, 0) - 1j * _op(0, 2))))

    def advance_probe(probe_in, rho31):
        # E_out = E_in exp(i A chi) with chi = Gamma3 rho31 / E_in
        return probe_in * np.exp(1j * slab_scale * g3 * rho31 / probe_in)

    states = []
    probe = complex(fields.omega_p)
    for _ in range(n_slabs):
        rho = steady_state(medium, fields, 0.0, probe=probe).rho
        states.append(rho_to_real(rho))
        probe = advance_probe(probe, rho[2, 0])
    y0 = np.concatenate(states)

    def fun(t, y):
        x = y.reshape(n_slabs, -1)
        rho31 = x[:, _RE13] - 1j * x[:, _IM13]
        probes = np.empty(n_slabs, dtype=complex)
        p = complex(fields.omega_p)
        for k in range(n_slabs):
            probes[k] = p
            p = advance_probe(p, rho31[k])
        common = x @ (l_base + signal_envelope(t, pulse, peak) * l_sig).T
        dx = common + probes.real[:, None] * (x @ l_pre.T) + probes.imag[:, None] * (x @ l_pim.T)
        return dx.reshape(-1)

    fastest = max(medium.Gamma3, medium.Gamma4, abs(fields.delta_s), fields.omega_c)
    sol = _solve_around_pulse(fun, grid, y0, None, rtol, atol, method, pulse, first_step=0.01 / fastest)
    diag = _state_diagnostics(real_to_rho(sol.y.T.reshape(-1, 16)))
    xs = _dense_eval(sol, grid.times).reshape(n_slabs, 16, -1)
    probe_out = np.full(grid.n_samples, complex(fields.omega_p))
    for k in range(n_slabs):
        probe_out = advance_probe(probe_out, xs[k, _RE13] - 1j * xs[k, _IM13])
    ratio = probe_out / fields.omega_p
    phase = -np.unwrap(np.angle(ratio))
    transmission = np.abs(ratio) ** 2
    meta = {"engine": "bloch-slabs", "n_slabs": n_slabs, **diag}
    return PhaseTrace(grid, phase, transmission=transmission, meta=meta)
