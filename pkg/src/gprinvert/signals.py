"""Trace post-processing: envelope, alignment, resampling, noise, peak picking."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .em_sim import Trace
from .errors import DegenerateSignalError, InvalidArgumentError

DEFAULT_PROMINENCE = 0.1


def analytic_signal(x: np.ndarray) -> np.ndarray:
    """Frequency-domain analytic signal, zero-padded to the next power of two."""
    x = np.asarray(x, dtype=float)
    n = x.size
    nfft = 1 << max(1, (n - 1).bit_length())
    spectrum = np.fft.fft(x, nfft)
    weights = np.zeros(nfft)
    weights[0] = 1.0
    weights[1 : nfft // 2] = 2.0
    weights[nfft // 2] = 1.0
    return np.fft.ifft(spectrum * weights)[:n]


def envelope(trace: Trace) -> Trace:
    if len(trace) < 4:
        raise InvalidArgumentError("envelope needs at least 4 samples")
    return trace.with_samples(np.abs(analytic_signal(trace.samples)))


def resample(trace: Trace, dt: float) -> Trace:
    """Linear interpolation onto a grid of spacing ``dt`` starting at ``trace.t0``."""
    if dt == trace.dt:
        return trace
    n = max(2, int(math.floor((len(trace) - 1) * trace.dt / dt + 1e-9)) + 1)
    t = dt * np.arange(n)
    return Trace(dt, np.interp(t, trace.dt * np.arange(len(trace)), trace.samples), trace.t0)


@dataclass(frozen=True)
class Peak:
    time: float
    amplitude: float
    prominence: float


@dataclass(frozen=True)
class PeakSet:
    peaks: tuple[Peak, ...]
    threshold: float

    def __len__(self):
        return len(self.peaks)

    def __iter__(self):
        return iter(self.peaks)

    @property
    def times(self) -> np.ndarray:
        return np.array([p.time for p in self.peaks])

    def separation(self) -> float:
        """Delay between the first two peaks, NaN when fewer than two."""
        if len(self.peaks) < 2:
            return math.nan
        return self.peaks[1].time - self.peaks[0].time


def find_peaks(env: Trace, prominence_fraction: float = DEFAULT_PROMINENCE) -> PeakSet:
    """Interior local maxima with prominence >= fraction of the global maximum.

    Boundary samples are never peaks.
    """
    if not 0 < prominence_fraction < 1:
        raise InvalidArgumentError("prominence_fraction must lie in (0, 1)")
    y = env.samples
    top = float(np.max(y)) if y.size else 0.0
    threshold = prominence_fraction * top
    if top <= 0:
        return PeakSet((), threshold)
    idx, props = sps.find_peaks(y, prominence=threshold)
    peaks = tuple(
        Peak(float(env.t0 + i * env.dt), float(y[i]), float(p))
        for i, p in zip(idx, props["prominences"])
    )
    return PeakSet(peaks, threshold)


def direct_wave_position(samples: np.ndarray, prominence_fraction: float = DEFAULT_PROMINENCE) -> float:
    """Fractional sample position of the first prominent envelope peak.

    The peak sample is refined by a least-squares parabola over the
    contiguous samples within 10% of the peak value, so that the rounded
    difference of two positions is a stable integer shift even for traces
    that were linearly resampled.
    """
    env = np.abs(analytic_signal(samples))
    top = float(np.max(env))
    if top <= 10 * np.finfo(float).eps:
        raise DegenerateSignalError("signal has no envelope peak")
    idx, _ = sps.find_peaks(env, prominence=prominence_fraction * top)
    i = int(idx[0]) if idx.size else int(np.argmax(env))
    floor = 0.9 * env[i]
    lo, hi = i, i
    while lo > 0 and env[lo - 1] >= floor:
        lo -= 1
    while hi < env.size - 1 and env[hi + 1] >= floor:
        hi += 1
    lo, hi = max(0, min(lo, i - 1)), min(env.size - 1, max(hi, i + 1))
    if hi - lo < 2:
        return float(i)
    offsets = np.arange(lo, hi + 1) - i
    a, b, _ = np.polyfit(offsets, env[lo : hi + 1], 2)
    if a >= 0:
        return float(i)
    return i + float(np.clip(-b / (2.0 * a), offsets[0], offsets[-1]))


def shift_samples(x: np.ndarray, shift: int, length: int) -> np.ndarray:
    """Delay ``x`` by ``shift`` samples (negative advances), zero-filled to ``length``."""
    out = np.zeros(length)
    src_lo = max(0, -shift)
    dst_lo = max(0, shift)
    count = min(x.size - src_lo, length - dst_lo)
    if count > 0:
        out[dst_lo : dst_lo + count] = x[src_lo : src_lo + count]
    return out


def alignment_shift(reference: Trace, target: Trace) -> int:
    """Integer shift (in reference samples) that aligns target's direct wave."""
    ref_pos = direct_wave_position(reference.samples)
    target = resample(target, reference.dt)
    try:
        return int(round(ref_pos - direct_wave_position(target.samples)))
    except DegenerateSignalError:
        return 0


def align(reference: Trace, target: Trace, *, reference_position: float | None = None) -> Trace:
    """Shift ``target`` so its direct-wave envelope peak matches the reference's.

    The result has the reference's dt, t0 and length. ``reference_position`` lets
    callers that align many targets against one reference skip recomputing
    the reference peak.
    """
    if reference_position is None:
        reference_position = direct_wave_position(reference.samples)
    target = resample(target, reference.dt)
    try:
        shift = int(round(reference_position - direct_wave_position(target.samples)))
    except DegenerateSignalError:
        shift = 0
    return Trace(reference.dt, shift_samples(target.samples, shift, len(reference)), reference.t0)


def add_noise(trace: Trace, snr_db: float | None, seed: int) -> Trace:
    """White Gaussian noise at ``snr_db`` relative to the full-record power.

    ``snr_db=None`` or ``+inf`` returns the trace unchanged.
    """
    if snr_db is None or snr_db == math.inf:
        return trace
    power = float(np.mean(trace.samples**2))
    if power <= 0:
        raise InvalidArgumentError("cannot set an SNR on a zero-energy trace")
    sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    return trace.with_samples(trace.samples + rng.normal(0.0, sigma, len(trace)))
