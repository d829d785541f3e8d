"""Beat-note phase readout: synthesis, IQ demodulation, boxcar sampling and shot averaging."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import signal

from .errors import InvalidParameterError, ResolutionError, SamplingError
from .model import PhaseTrace, TimeGrid


@dataclass(frozen=True)
class DetectionParams:
    """Readout settings.

    ``detector_noise_rms`` is white phase noise (rad) added to every raw
    sample; ``atom_fluct_rms`` is the fractional shot-to-shot spread of the
    phase amplitude.
    """

    f_beat: float = 100e6
    sampling_period: float = 67e-9
    n_shots: int = 2500
    atom_fluct_rms: float = 0.15
    detector_noise_rms: float = 0.05
    rng_seed: int = 0

    def __post_init__(self):
        if not self.f_beat > 0:
            raise InvalidParameterError("f_beat must be positive")
        if not self.sampling_period > 0:
            raise InvalidParameterError("sampling_period must be positive")
        if int(self.n_shots) != self.n_shots or self.n_shots < 1:
            raise InvalidParameterError("n_shots must be an integer >= 1")
        if not self.atom_fluct_rms >= 0:
            raise InvalidParameterError("atom_fluct_rms must be >= 0")
        if not self.detector_noise_rms >= 0:
            raise InvalidParameterError("detector_noise_rms must be >= 0")

    @property
    def noiseless(self) -> bool:
        return self.atom_fluct_rms == 0 and self.detector_noise_rms == 0


@dataclass
class RawSeries:
    """Detector voltage on the oversampled grid; ``v`` may hold several shots along axis 0."""

    t: np.ndarray
    v: np.ndarray

    @property
    def fs(self) -> float:
        return 1.0 / (self.t[1] - self.t[0])


def raw_times(grid: TimeGrid, oversample: int) -> np.ndarray:
    n = (grid.n_samples - 1) * oversample + 1
    return grid.t_start + np.arange(n) * (grid.dt / oversample)


def synthesize_beat(
    phase: PhaseTrace,
    transmission=None,
    params: DetectionParams = DetectionParams(),
    oversample: int = 1,
    *,
    e_ref: float = 1.0,
    e_probe: float = 1.0,
    phase_noise=None,
) -> RawSeries:
    """|E_r exp(-i 2 pi f t) + E_p sqrt(T) exp(i phi)|^2 on the oversampled grid.

    ``phase_noise`` (optional) is added to the interpolated phase sample by
    sample and may carry a leading shot axis.
    """
    grid = phase.grid
    fs = oversample / grid.dt
    if fs < 8.0 * params.f_beat:
        raise SamplingError(
            f"raw sample rate {fs:.4g} Hz is below 8 x f_beat = {8 * params.f_beat:.4g} Hz"
        )
    if transmission is None:
        transmission = phase.transmission if phase.transmission is not None else np.ones(grid.n_samples)
    t = raw_times(grid, oversample)
    if oversample == 1:
        phi = phase.phase
        trans = np.asarray(transmission, dtype=float)
    else:
        phi = np.interp(t, grid.times, phase.phase)
        trans = np.interp(t, grid.times, transmission)
    if phase_noise is not None:
        phi = phi + phase_noise
    amp = e_probe * np.sqrt(np.clip(trans, 0.0, None))
    carrier = 2.0 * math.pi * params.f_beat * t
    v = e_ref**2 + amp**2 + 2.0 * e_ref * amp * np.cos(carrier + phi)
    return RawSeries(t, v)


def lowpass_taps(fs: float, f_beat: float) -> np.ndarray:
    """Hamming-windowed sinc, cutoff f_beat/4, spanning eight beat periods."""
    numtaps = 2 * int(round(4.0 * fs / f_beat)) + 1
    return signal.firwin(numtaps, f_beat / 4.0, fs=fs)


def _bin_index(t, start, period):
    n_bins = int(math.floor((t[-1] - start) / period + 1e-9))
    idx = np.floor((t - start) / period + 1e-9).astype(int)
    return n_bins, idx


def demodulate(raw: RawSeries, params: DetectionParams = DetectionParams()) -> PhaseTrace:
    """IQ demodulation at ``f_beat`` followed by boxcar averaging into sampling-period bins.

    Bins start half a filter length into the record so that every binned
    sample sees the full low-pass window. ``raw.v`` may be 2-D (shots x
    samples); the per-shot rows are then returned in ``meta['shots']`` and
    their mean in ``phase``.
    """
    t = raw.t
    fs = raw.fs
    if params.sampling_period * params.f_beat < 3.0:
        raise ResolutionError("each output bin must span at least 3 beat periods")
    taps = lowpass_taps(fs, params.f_beat)
    half = (taps.size - 1) // 2
    if t.size <= 2 * half + 1:
        raise ResolutionError("raw series shorter than the demodulation filter")
    start = t[half]
    n_bins, idx = _bin_index(t[: t.size - half], start, params.sampling_period)
    if n_bins < 2:
        raise ResolutionError("raw series shorter than two sampling periods after filter edges")
    v = np.atleast_2d(raw.v)
    v = v - v.mean(axis=1, keepdims=True)
    carrier = 2.0 * math.pi * params.f_beat * t
    z = 2.0 * v * np.exp(-1j * carrier)
    zf = signal.oaconvolve(z, taps[None, :], mode="same", axes=1)[:, : t.size - half]
    phi = np.unwrap(np.angle(zf), axis=1)
    keep = (idx >= 0) & (idx < n_bins)
    sel = idx[keep]
    counts = np.bincount(sel, minlength=n_bins)
    binned = np.empty((v.shape[0], n_bins))
    for k in range(v.shape[0]):
        binned[k] = np.bincount(sel, weights=phi[k, keep], minlength=n_bins) / counts
    binned = np.unwrap(binned, axis=1)
    grid = TimeGrid(start + 0.5 * params.sampling_period, params.sampling_period, n_bins)
    meta = {"sampling_period": params.sampling_period, "f_beat": params.f_beat}
    if np.ndim(raw.v) == 1:
        return PhaseTrace(grid, binned[0], meta=meta)
    meta["shots"] = binned
    return PhaseTrace(grid, binned.mean(axis=0), meta=meta)


def bin_average(trace: PhaseTrace, like: PhaseTrace) -> np.ndarray:
    """Boxcar average of a finely sampled trace over the bins of ``like`` (the ideal readout)."""
    t = trace.times
    edges = like.times - 0.5 * like.grid.dt
    idx = np.floor((t - edges[0]) / like.grid.dt + 1e-9).astype(int)
    keep = (idx >= 0) & (idx < like.grid.n_samples)
    counts = np.bincount(idx[keep], minlength=like.grid.n_samples)
    return np.bincount(idx[keep], weights=trace.phase[keep], minlength=like.grid.n_samples) / counts


def shot_rng(seed: int, shot: int, stream=()) -> np.random.Generator:
    """Generator for one shot; ``stream`` separates independent runs that share a seed."""
    return np.random.default_rng([int(seed), *(int(s) for s in stream), int(shot)])


Generator = Union[PhaseTrace, Callable[[int], PhaseTrace]]


def _shot_block(source: Generator, params: DetectionParams, oversample: int, shots: range, stream=()):
    traces = [source(s) if callable(source) else source for s in shots]
    base = traces[0]
    n_raw = (base.grid.n_samples - 1) * oversample + 1
    rows = []
    for s, tr in zip(shots, traces):
        rng = shot_rng(params.rng_seed, s, stream)
        eps = rng.normal(0.0, params.atom_fluct_rms) if params.atom_fluct_rms > 0 else 0.0
        noise = rng.normal(0.0, params.detector_noise_rms, n_raw) if params.detector_noise_rms > 0 else None
        scaled = PhaseTrace(tr.grid, (1.0 + eps) * tr.phase, transmission=tr.transmission)
        rows.append(synthesize_beat(scaled, None, params, oversample, phase_noise=noise).v)
    raw = RawSeries(raw_times(base.grid, oversample), np.array(rows))
    return demodulate(raw, params).meta["shots"]


def run_shots(
    source: Generator,
    params: DetectionParams = DetectionParams(),
    oversample: int = 1,
    *,
    block: int = 50,
    workers: Optional[int] = None,
    keep_shots: bool = False,
    stream=(),
) -> PhaseTrace:
    """Average ``params.n_shots`` noisy demodulated shots.

    ``source`` is either the noiseless trace or a callable returning the trace
    for a given shot index. Each shot draws from its own generator seeded by
    (rng_seed, *stream, shot index), so the result does not depend on
    ``block`` or ``workers``.
    """
    n = int(params.n_shots)
    blocks = [range(i, min(i + block, n)) for i in range(0, n, block)]
    if workers and workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _shot_block(source, params, oversample, b, stream), blocks))
    else:
        parts = [_shot_block(source, params, oversample, b, stream) for b in blocks]
    shots = np.concatenate(parts, axis=0)
    first = source(0) if callable(source) else source
    grid = demodulate(synthesize_beat(first, None, params, oversample), params).grid
    mean = shots.mean(axis=0)
    stderr = shots.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else None
    meta = {"n_shots": n, "sampling_period": params.sampling_period, "rng_seed": params.rng_seed}
    if keep_shots:
        meta["shots"] = shots
    return PhaseTrace(grid, mean, stderr=stderr, meta=meta)
