"""Scenario configuration, figure presets, sweep execution and file export.

A scenario sweeps exactly one axis (EIT window or signal pulse duration).
Each sweep point runs the selected engine, passes the trace through the
beat-note readout and fits the LTI profile. Outputs are plain CSV/JSON and
every file carries the SHA-256 of the canonical config.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, bloch, lti
from .detection import DetectionParams, run_shots
from .errors import InvalidParameterError, XpmError
from .fitting import FitResult, fit_phase_profile, profile_model
from .model import TWO_PI, FieldParams, MediumParams, PhaseTrace, SignalPulse, SpectralWindow, TimeGrid
from .spectroscopy import coupling_for_window

ENGINES = ("lti", "bloch", "bloch-slabs")
SWEEPS = ("window", "tau_s")
WORKERS_ENV = "XPMEIT_WORKERS"
TRACE_HEADER = ("time_s", "phase_rad", "stderr_rad")
SUMMARY_COLUMNS = (
    "index",
    "sweep_value",
    "window_hz",
    "tau_s_in",
    "status",
    "peak_phase",
    "peak_phase_err",
    "integrated_phase",
    "integrated_phase_err",
    "rise",
    "rise_err",
    "fall",
    "fall_err",
    "fall_1e",
    "fall_theory",
    "residual_rms",
    "converged",
    "n_iterations",
    "error",
)


@dataclass(frozen=True)
class ScenarioConfig:
    """One parameter sweep.

    ``sweep`` names the axis; the list for the other axis must hold exactly
    one value. The pulse is fixed either by ``peak_power`` (W) or by
    ``energy`` (J), never both. Window values are FWHM in Hz, pulse
    durations are intensity RMS widths in s, ``delta_s`` is in rad/s.
    """

    scenario: str
    engine: str = "bloch-slabs"
    medium: MediumParams = MediumParams()
    sweep: str = "window"
    windows_hz: tuple = (0.38e6,)
    tau_s: tuple = (40e-9,)
    peak_power: Optional[float] = None
    energy: Optional[float] = None
    delta_s: float = TWO_PI * 40e6
    detection: DetectionParams = DetectionParams()
    out_dir: str = "out"
    seed: int = 0
    n_slabs: Optional[int] = None
    dt: float = 1e-9
    derived_from: Optional[str] = None
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "windows_hz", tuple(float(w) for w in self.windows_hz))
        object.__setattr__(self, "tau_s", tuple(float(t) for t in self.tau_s))
        if self.engine not in ENGINES:
            raise InvalidParameterError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.sweep not in SWEEPS:
            raise InvalidParameterError(f"sweep must be one of {SWEEPS}, got {self.sweep!r}")
        if not self.windows_hz or not self.tau_s:
            raise InvalidParameterError("windows_hz and tau_s must be non-empty")
        fixed = self.tau_s if self.sweep == "window" else self.windows_hz
        if len(fixed) != 1:
            raise InvalidParameterError("exactly one sweep axis: the other list must hold a single value")
        if (self.peak_power is None) == (self.energy is None):
            raise InvalidParameterError("set exactly one of peak_power and energy")
        if any(t <= 0 for t in self.tau_s):
            raise InvalidParameterError("pulse durations must be positive")
        for w in self.windows_hz:
            if TWO_PI * w <= 2.0 * self.medium.gamma:
                raise InvalidParameterError(f"window {w:g} Hz is not above twice the dephasing rate")
        if not self.dt > 0:
            raise InvalidParameterError("dt must be positive")
        if self.n_slabs is not None and self.n_slabs < 1:
            raise InvalidParameterError("n_slabs must be >= 1")
        # raise early on inconsistent pulses rather than at the first sweep point
        for i in range(self.n_points):
            self.pulse(i)

    @property
    def n_points(self) -> int:
        return len(self.windows_hz) if self.sweep == "window" else len(self.tau_s)

    def sweep_values(self) -> tuple:
        return self.windows_hz if self.sweep == "window" else self.tau_s

    def window_hz(self, i: int) -> float:
        return self.windows_hz[i] if self.sweep == "window" else self.windows_hz[0]

    def window(self, i: int) -> SpectralWindow:
        return SpectralWindow.from_hz(self.window_hz(i))

    def pulse(self, i: int) -> SignalPulse:
        tau_s = self.tau_s[i] if self.sweep == "tau_s" else self.tau_s[0]
        if self.peak_power is not None:
            return SignalPulse.from_peak_power(self.peak_power, tau_s)
        return SignalPulse.from_energy(self.energy, tau_s)

    def fields(self, i: int) -> FieldParams:
        omega_c = coupling_for_window(self.window(i).delta_eit, self.medium)
        omega_p = min(TWO_PI * 50e3, omega_c / 20.0)
        return FieldParams(omega_p=omega_p, omega_c=omega_c, delta_s=self.delta_s)

    def slabs(self) -> int:
        if self.n_slabs is not None:
            return self.n_slabs
        return max(1, math.ceil(2.0 * self.medium.d0))

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["windows_hz"] = list(self.windows_hz)
        d["tau_s"] = list(self.tau_s)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "medium" in d:
            d["medium"] = MediumParams(**d["medium"])
        if "detection" in d:
            d["detection"] = DetectionParams(**d["detection"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        return cls.from_dict(json.loads(text))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON, excluding the output directory."""
        d = self.to_dict()
        d.pop("out_dir")
        canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


_FIG2 = ScenarioConfig(
    scenario="fig2",
    medium=MediumParams(d0=3.0),
    sweep="window",
    windows_hz=(0.38e6, 0.6e6, 1.0e6, 2.0e6, 4.0e6),
    tau_s=(40e-9,),
    peak_power=0.8e-6,
    description="Phase traces for a 40 ns, 0.8 uW signal pulse across EIT windows, OD 3",
)
_FIG5 = ScenarioConfig(
    scenario="fig5",
    medium=MediumParams(d0=3.0),
    sweep="tau_s",
    windows_hz=(0.6e6,),
    tau_s=(20e-9, 40e-9, 70e-9, 140e-9, 255e-9),
    energy=75e-15,
    description="Phase traces at a 600 kHz window for 75 fJ pulses of varying duration, OD 3",
)

PRESETS = {
    "fig2": _FIG2,
    "fig3": _FIG2.with_(
        scenario="fig3",
        derived_from="fig2",
        description="Peak and integrated phase against window width, extracted from the fig2 sweep",
    ),
    "fig4": ScenarioConfig(
        scenario="fig4",
        medium=MediumParams(d0=1.8),
        sweep="window",
        windows_hz=(0.38e6, 0.6e6, 1.0e6, 2.0e6, 4.0e6),
        tau_s=(140e-9,),
        peak_power=160e-9,
        description="Rise and fall times against window width for a 140 ns, 160 nW pulse, OD 1.8",
    ),
    "fig5": _FIG5,
    "fig6": _FIG5.with_(
        scenario="fig6",
        derived_from="fig5",
        description="Rise and fall times against pulse duration, extracted from the fig5 sweep",
    ),
    "validation-lti-vs-bloch": ScenarioConfig(
        scenario="validation-lti-vs-bloch",
        engine="bloch",
        medium=MediumParams(d0=3.0),
        sweep="window",
        windows_hz=(0.38e6, 0.6e6, 1.0e6, 2.0e6, 4.0e6),
        tau_s=(40e-9,),
        peak_power=0.2e-6,
        description="Weak-signal cross-check of LTI and Bloch integrated phases over the fig2 windows",
    ),
}


def list_presets() -> dict:
    """Preset name -> one-line description (with its source sweep when derived)."""
    out = {}
    for name, cfg in PRESETS.items():
        desc = cfg.description
        if cfg.derived_from:
            desc += f" [derived-from: {cfg.derived_from}]"
        out[name] = desc
    return out


def get_preset(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise InvalidParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def lti_coupling_const(config: ScenarioConfig, i: int = 0) -> float:
    """C such that the LTI integrated phase matches a thin-medium AC Stark estimate.

    The signal shifts the two-photon resonance by S(t) = Omega_s(t)^2/(4 delta_s);
    the EIT dispersion converts the shift area into d0 * int S dt / Delta of
    integrated phase (dephasing-free limit).
    """
    pulse = config.pulse(i)
    omega = bloch.signal_rabi_peak(pulse)
    area = omega**2 / (4.0 * config.delta_s) * math.sqrt(TWO_PI) * pulse.tau_s
    return config.medium.d0 * area / pulse.n_ph


def lti_kernel(config: ScenarioConfig, i: int) -> lti.LtiKernel:
    window = config.window(i)
    c = lti_coupling_const(config, i)
    return lti.LtiKernel(
        lti.integrated_phase_per_photon(window, config.medium, c),
        lti.response_time(window, config.medium),
    )


def simulation_grid(config: ScenarioConfig, i: int) -> TimeGrid:
    pulse = config.pulse(i)
    tau = lti.response_time(config.window(i), config.medium)
    return TimeGrid.spanning(-(8.0 * pulse.tau_s + 0.6e-6), 8.0 * pulse.tau_s + 7.0 * tau, config.dt)


def engine_trace(config: ScenarioConfig, i: int, engine: Optional[str] = None) -> PhaseTrace:
    """Noiseless probe phase for sweep point ``i`` on the simulation grid."""
    engine = engine or config.engine
    grid = simulation_grid(config, i)
    pulse = config.pulse(i)
    if engine == "lti":
        phase = lti.phase_profile(grid.times, lti_kernel(config, i), pulse)
        return PhaseTrace(grid, phase, meta={"engine": "lti"})
    fields_ = config.fields(i)
    if engine == "bloch":
        coh = bloch.evolve(config.medium, fields_, pulse, grid, check_grid=False)
        trace = bloch.probe_response(coh, bloch.calibrate_thin_medium(config.medium, fields_), fields_)
        trace.meta.update(coh.diagnostics)
        return trace
    if engine == "bloch-slabs":
        return bloch.propagate_slabs(config.medium, fields_, pulse, grid, config.slabs())
    raise InvalidParameterError(f"unknown engine {engine!r}")


def _peak_height(p) -> float:
    amplitude, tau_s, tau, t0, baseline = p
    t = np.linspace(t0 - 3.0 * tau_s, t0 + 6.0 * tau_s + 3.0 * tau, 4001)
    y = profile_model(t, p) - baseline
    return float(y.max() if amplitude >= 0 else y.min())


def peak_with_error(fit: FitResult):
    """Peak excursion of the fitted profile and its 1-sigma error from the covariance."""
    p = np.array(fit.params)
    peak = _peak_height(p)
    grad = np.zeros(5)
    for k in range(5):
        h = 1e-6 * max(abs(p[k]), 1e-12) if k != 3 else 1e-6 * p[1]
        up, dn = p.copy(), p.copy()
        up[k] += h
        dn[k] -= h
        grad[k] = (_peak_height(up) - _peak_height(dn)) / (2.0 * h)
    var = float(grad @ fit.covariance @ grad)
    return peak, math.sqrt(var) if var > 0 else 0.0


@dataclass
class PointResult:
    index: int
    row: dict
    trace: Optional[PhaseTrace] = None


@dataclass
class ResultTable:
    """Per-point summary rows plus a provenance block."""

    config: ScenarioConfig
    rows: list
    provenance: dict

    def __post_init__(self):
        if len(self.rows) != self.config.n_points:
            raise InvalidParameterError("row count must equal the sweep length")
        if not self.provenance:
            raise InvalidParameterError("provenance block must not be empty")

    @property
    def failures(self) -> list:
        return [r for r in self.rows if r["status"] != "ok"]

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)


def _blank_row(config: ScenarioConfig, i: int) -> dict:
    row = {k: float("nan") for k in SUMMARY_COLUMNS}
    row.update(
        index=i,
        sweep_value=config.sweep_values()[i],
        window_hz=config.window_hz(i),
        tau_s_in=config.pulse(i).tau_s,
        fall_theory=lti.response_time(config.window(i), config.medium),
        status="ok",
        converged=False,
        n_iterations=0,
        error="",
    )
    return row


def run_point(config: ScenarioConfig, i: int) -> PointResult:
    """Engine, readout and fit for one sweep point; errors land in the row."""
    row = _blank_row(config, i)
    try:
        clean = engine_trace(config, i)
        det = replace(config.detection, rng_seed=config.seed)
        measured = run_shots(clean, det, stream=(i,))
        fit = fit_phase_profile(measured)
        peak, peak_err = peak_with_error(fit)
        err = fit.errors
        row.update(
            peak_phase=peak,
            peak_phase_err=peak_err,
            integrated_phase=fit.amplitude,
            integrated_phase_err=err.amplitude,
            rise=fit.tau_s,
            rise_err=err.tau_s,
            fall=fit.tau,
            fall_err=err.tau,
            fall_1e=fit.fall_1e,
            residual_rms=fit.residual_rms,
            converged=bool(fit.converged),
            n_iterations=fit.n_iterations,
        )
        if not fit.converged:
            row.update(status="error", error=f"fit did not converge: {fit.message}")
        return PointResult(i, row, measured)
    except XpmError as exc:
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
        return PointResult(i, row, None)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidParameterError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InvalidParameterError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def run_points(config: ScenarioConfig, workers: Optional[int] = None) -> list:
    """All sweep points, ordered by index whatever order they finish in."""
    workers = worker_count() if workers is None else workers
    indices = range(config.n_points)
    if workers > 1 and config.n_points > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: run_point(config, i), indices))
    else:
        results = [run_point(config, i) for i in indices]
    return sorted(results, key=lambda r: r.index)


def provenance(config: ScenarioConfig) -> dict:
    return {
        "config_hash": config.config_hash(),
        "code_version": __version__,
        "seed": config.seed,
        "engine": config.engine,
        "derived_from": config.derived_from,
    }


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _header_lines(config: ScenarioConfig, extra: str = "") -> str:
    line = f"# config_hash={config.config_hash()} scenario={config.scenario} code_version={__version__}"
    return line + (f" {extra}" if extra else "") + "\n"


def trace_csv(trace: PhaseTrace, config: ScenarioConfig, i: int) -> str:
    buf = io.StringIO()
    buf.write(_header_lines(config, f"point={i} sweep={config.sweep} value={_fmt(config.sweep_values()[i])}"))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    err = trace.stderr if trace.stderr is not None else np.full(len(trace), np.nan)
    for t, y, e in zip(trace.times, trace.phase, err):
        w.writerow((f"{t:.12e}", f"{y:.12e}", f"{e:.12e}"))
    return buf.getvalue()


def summary_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    buf.write(_header_lines(table.config))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in table.rows:
        w.writerow([_fmt(r[k]) for k in SUMMARY_COLUMNS])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (float, np.floating)):
        return None if not math.isfinite(v) else float(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def summary_json(table: ResultTable) -> str:
    doc = {
        "config": table.config.to_dict(),
        "provenance": table.provenance,
        "rows": table.rows,
    }
    return json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n"


@dataclass
class ScenarioOutput:
    table: ResultTable
    files: list = field(default_factory=list)
    traces: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.table.failures


def _write(path: Path, text: str, files: list):
    path.write_text(text)
    files.append(path)


def run_scenario(config: ScenarioConfig, workers: Optional[int] = None) -> ScenarioOutput:
    """Run every sweep point and write traces, summary CSV/JSON and plot data.

    Output goes to ``<out_dir>/<scenario>/``. Point failures are recorded in
    the summary (status ``error``) and do not stop the sweep.
    """
    results = run_points(config, workers)
    table = ResultTable(config, [r.row for r in results], provenance(config))
    out = Path(config.out_dir) / config.scenario
    (out / "traces").mkdir(parents=True, exist_ok=True)
    files: list = []
    _write(out / "config.json", config.to_json() + "\n", files)
    for r in results:
        if r.trace is not None:
            _write(out / "traces" / f"point_{r.index:02d}.csv", trace_csv(r.trace, config, r.index), files)
    _write(out / "summary.csv", summary_csv(table), files)
    _write(out / "summary.json", summary_json(table), files)
    _write(out / "plotdata.csv", export_plotdata(table, plot_kind(config)), files)
    return ScenarioOutput(table, files, [r.trace for r in results])


def plot_kind(config: ScenarioConfig) -> str:
    return "window" if config.sweep == "window" else "tau_s"


def fit_coupling_const(window_hz, integrated, n_ph, gamma):
    """Least-squares C for integrated = C n_ph (1/Delta)(1 - 2 gamma/Delta); returns (C, R^2)."""
    delta = TWO_PI * np.asarray(window_hz, dtype=float)
    g = n_ph * (1.0 - 2.0 * gamma / delta) / delta
    y = np.asarray(integrated, dtype=float)
    ok = np.isfinite(y)
    g, y = g[ok], y[ok]
    if y.size == 0:
        return float("nan"), float("nan")
    c = float(g @ y / (g @ g))
    ss_res = float(np.sum((y - c * g) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return c, r2


def export_plotdata(table: ResultTable, kind: str) -> str:
    """Plot-ready CSV with theory overlays.

    ``kind='window'``: fitted C (1/Delta)(1 - 2 gamma/Delta) integrated-phase
    curve, its gamma = 0 counterpart C/Delta, and the response-time formula
    for the fall time. ``kind='tau_s'``: the response-time prediction and
    the identity line for the rise time.
    """
    cfg = table.config
    n_ph = cfg.pulse(0).n_ph
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if kind == "window":
        c, r2 = fit_coupling_const(table.column("window_hz"), table.column("integrated_phase"), n_ph, cfg.medium.gamma)
        buf.write(_header_lines(cfg, f"kind=window C_fit={_fmt(c)} r2={_fmt(r2)}"))
        w.writerow(
            (
                "window_hz",
                "peak_phase",
                "peak_phase_err",
                "integrated_phase",
                "integrated_phase_err",
                "integrated_fit",
                "integrated_gamma0",
                "rise",
                "rise_err",
                "fall",
                "fall_err",
                "fall_theory",
            )
        )
        for r in table.rows:
            delta = TWO_PI * r["window_hz"]
            fit_curve = c * n_ph / delta * (1.0 - 2.0 * cfg.medium.gamma / delta)
            w.writerow(
                [
                    _fmt(r["window_hz"]),
                    _fmt(r["peak_phase"]),
                    _fmt(r["peak_phase_err"]),
                    _fmt(r["integrated_phase"]),
                    _fmt(r["integrated_phase_err"]),
                    _fmt(fit_curve),
                    _fmt(c * n_ph / delta),
                    _fmt(r["rise"]),
                    _fmt(r["rise_err"]),
                    _fmt(r["fall"]),
                    _fmt(r["fall_err"]),
                    _fmt(r["fall_theory"]),
                ]
            )
    elif kind == "tau_s":
        buf.write(_header_lines(cfg, "kind=tau_s"))
        w.writerow(("tau_s_in", "rise", "rise_err", "rise_identity", "fall", "fall_err", "fall_theory"))
        for r in table.rows:
            w.writerow(
                [
                    _fmt(r["tau_s_in"]),
                    _fmt(r["rise"]),
                    _fmt(r["rise_err"]),
                    _fmt(r["tau_s_in"]),
                    _fmt(r["fall"]),
                    _fmt(r["fall_err"]),
                    _fmt(r["fall_theory"]),
                ]
            )
    else:
        raise InvalidParameterError(f"unknown plot kind {kind!r}")
    return buf.getvalue()


def _binned(trace: PhaseTrace, width: float) -> PhaseTrace:
    k = max(1, int(round(width / trace.grid.dt)))
    n = trace.grid.n_samples // k
    y = trace.phase[: n * k].reshape(n, k).mean(axis=1)
    grid = TimeGrid(trace.grid.t_start + 0.5 * (k - 1) * trace.grid.dt, k * trace.grid.dt, n)
    return PhaseTrace(grid, y)


def compare_engines(config: ScenarioConfig, engine: Optional[str] = None, bin_width: float = 10e-9) -> list:
    """LTI prediction against a Bloch engine for every sweep point, without readout noise.

    Each row holds the engine's integrated phase (baseline removed), the LTI
    value, their relative difference, and the RMS residual of an LTI profile
    fit to the engine trace as a fraction of its peak.
    """
    engine = engine or (config.engine if config.engine != "lti" else "bloch")
    rows = []
    for i in range(config.n_points):
        row = {"index": i, "window_hz": config.window_hz(i), "tau_s_in": config.pulse(i).tau_s, "error": ""}
        try:
            trace = engine_trace(config, i, engine)
            y = trace.phase - trace.phase[0]
            integrated = float(np.trapezoid(y, trace.times))
            kernel = lti_kernel(config, i)
            predicted = kernel.phi0 * config.pulse(i).n_ph
            binned = _binned(PhaseTrace(trace.grid, y), bin_width)
            fit = fit_phase_profile(binned)
            resid = binned.phase - fit.model(binned.times)
            row.update(
                integrated_bloch=integrated,
                integrated_lti=predicted,
                rel_diff=abs(integrated - predicted) / abs(predicted),
                fit_rms_over_peak=float(np.sqrt(np.mean(resid**2)) / np.max(np.abs(binned.phase))),
                fit_tau=fit.tau,
                fit_tau_s=fit.tau_s,
                fall_theory=kernel.tau,
            )
        except XpmError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def validation_csv(config: ScenarioConfig, rows: list) -> str:
    cols = (
        "index",
        "window_hz",
        "tau_s_in",
        "integrated_bloch",
        "integrated_lti",
        "rel_diff",
        "fit_rms_over_peak",
        "fit_tau",
        "fit_tau_s",
        "fall_theory",
        "error",
    )
    buf = io.StringIO()
    buf.write(_header_lines(config, "kind=engine-comparison"))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(k, float("nan"))) for k in cols])
    return buf.getvalue()


def read_trace_csv(path) -> PhaseTrace:
    """Load a trace CSV (``#`` comment lines allowed; stderr column may be empty or nan)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = tuple(h.strip() for h in next(reader))
    if header[:2] != TRACE_HEADER[:2]:
        raise InvalidParameterError(f"trace CSV header must start with time_s, phase_rad; got {header}")
    rows = [r for r in reader if r]
    t = np.array([float(r[0]) for r in rows])
    y = np.array([float(r[1]) for r in rows])
    err = None
    if len(header) > 2:
        e = np.array([float(r[2]) if len(r) > 2 and r[2].strip() else np.nan for r in rows])
        if np.all(np.isfinite(e)):
            err = e
    if t.size < 2:
        raise InvalidParameterError("trace needs at least two samples")
    dt = float(np.mean(np.diff(t)))
    if np.max(np.abs(np.diff(t) - dt)) > 1e-6 * abs(dt):
        raise InvalidParameterError("trace samples must be uniformly spaced")
    return PhaseTrace(TimeGrid(float(t[0]), dt, t.size), y, stderr=err)
