"""Preprocessing of multi-lead ECG records: smoothing, powerline notch,
spectrum, R-peak detection, beat slicing and decimation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .beats import BeatTensor

REFRACTORY_S = 0.2

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RawRecord:
    samples: np.ndarray  # (n_leads, record_len), mV
    sample_rate: float
    record_id: str = ""
    label: int = -1

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or not np.all(np.isfinite(x)):
            raise ValueError("record samples must be a finite (n_leads, len) array")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", x)

    @property
    def duration(self):
        return self.samples.shape[1] / self.sample_rate


@dataclass(frozen=True)
class NotchSpec:
    center_hz: float = 50.0
    quality: float = 30.0
    sample_rate: float = 100.0

    def __post_init__(self):
        if not 0 < self.center_hz < self.sample_rate / 2:
            raise ValueError(
                f"notch center {self.center_hz} Hz must lie in (0, Nyquist={self.sample_rate / 2})"
            )
        if not self.quality > 0:
            raise ValueError("quality must be positive")

    def coefficients(self):
        """Biquad (b, a) from the bilinear transform of (s^2 + w0^2) / (s^2 + s w0/Q + w0^2)."""
        w0 = 2.0 * np.pi * self.center_hz / self.sample_rate
        alpha = np.sin(w0) / (2.0 * self.quality)
        cw = np.cos(w0)
        b = np.array([1.0, -2.0 * cw, 1.0])
        a = np.array([1.0 + alpha, -2.0 * cw, 1.0 - alpha])
        return b / a[0], a / a[0]


def _as_1d(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a 1-D signal")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal has non-finite samples")
    return x


def window_filter(x, n=5):
    """Centered n-point moving average with reflection padding."""
    x = _as_1d(x)
    if n < 1 or n % 2 == 0:
        raise ValueError(f"window length must be odd and >= 1, got {n}")
    if n > len(x):
        raise ValueError(f"window length {n} exceeds signal length {len(x)}")
    if n == 1:
        return x.copy()
    half = n // 2
    padded = np.pad(x, half, mode="reflect")
    return np.convolve(padded, np.full(n, 1.0 / n), mode="valid")


def notch_filter(x, spec):
    """Zero-phase powerline notch: the biquad run forward then backward."""
    x = _as_1d(x)
    if len(x) < 16:
        raise ValueError("notch filtering needs at least 16 samples")
    b, a = spec.coefficients()
    return sps.filtfilt(b, a, x)


def fft_spectrum(x, sample_rate=1.0):
    """One-sided magnitude spectrum ``|rfft(x)|`` with bin frequencies in Hz."""
    x = _as_1d(x)
    if len(x) < 2:
        raise ValueError("spectrum needs at least 2 samples")
    return np.fft.rfftfreq(len(x), d=1.0 / sample_rate), np.abs(np.fft.rfft(x))


def _moving_sum(x, n):
    return np.convolve(x, np.ones(n), mode="same")


def detect_r_peaks(lead, sample_rate):
    """Pan-Tompkins style detector.

    Band-pass 5-15 Hz, differentiate, square, integrate over 150 ms, then
    walk the integrated peaks with adaptive signal/noise levels, a 200 ms
    refractory gap and a search-back at half threshold after long gaps.
    Each accepted peak is snapped to the largest absolute deflection of the
    (baseline-removed) lead within +-75 ms.
    """
    x = _as_1d(lead)
    fs = float(sample_rate)
    if len(x) < 2 * fs:
        raise ValueError("R-peak detection needs at least 2 s of signal")
    if np.ptp(x) == 0.0:
        return np.array([], dtype=int)
    hi = min(15.0, 0.45 * fs)
    sos = sps.butter(2, [5.0, hi], btype="bandpass", fs=fs, output="sos")
    band = sps.sosfiltfilt(sos, x)
    slope = np.gradient(band)
    energy = _moving_sum(slope * slope, max(1, int(round(0.15 * fs))))
    refractory = int(round(REFRACTORY_S * fs))

    cand, _ = sps.find_peaks(energy, distance=max(1, refractory))
    if len(cand) == 0:
        return np.array([], dtype=int)
    learn = energy[: int(2 * fs)]
    spk = 0.25 * float(learn.max())
    npk = 0.5 * float(learn.mean())
    accepted = []
    for c in cand:
        thr = npk + 0.25 * (spk - npk)
        if energy[c] > thr and (not accepted or c - accepted[-1] >= refractory):
            accepted.append(c)
            spk = 0.125 * energy[c] + 0.875 * spk
        else:
            npk = 0.125 * energy[c] + 0.875 * npk
    thr = npk + 0.25 * (spk - npk)

    # search back at half threshold inside gaps longer than 1.66 median RR
    if len(accepted) >= 3:
        rr = np.median(np.diff(accepted))
        extra = []
        for left, right in zip(accepted[:-1], accepted[1:]):
            if right - left > 1.66 * rr:
                inner = cand[(cand >= left + refractory) & (cand <= right - refractory)]
                if len(inner):
                    best = inner[np.argmax(energy[inner])]
                    if energy[best] > 0.5 * thr:
                        extra.append(best)
        accepted = sorted(accepted + extra)

    base = x - np.median(x)
    half = max(1, int(round(0.075 * fs)))
    peaks = []
    for c in accepted:
        lo, hi_ = max(0, c - half), min(len(x), c + half + 1)
        p = lo + int(np.argmax(np.abs(base[lo:hi_])))
        if not peaks or p - peaks[-1] >= refractory:
            peaks.append(p)
        elif abs(base[p]) > abs(base[peaks[-1]]):
            peaks[-1] = p
    return np.asarray(peaks, dtype=int)


def segment_beats(record, r_peaks, pre_samples, post_samples, label=None):
    """Slice ``[r - pre, r + post)`` around each R peak; windows crossing a border are dropped.

    Returns
    -------
    beats : list of BeatTensor
    dropped : int
    """
    if pre_samples < 1 or post_samples < 1:
        raise ValueError("pre_samples and post_samples must be >= 1")
    if pre_samples + post_samples < 8:
        raise ValueError("beat windows need at least 8 samples")
    n = record.samples.shape[1]
    beats = []
    dropped = 0
    lab = record.label if label is None else label
    for k, r in enumerate(np.asarray(r_peaks, dtype=int)):
        lo, hi = r - pre_samples, r + post_samples
        if lo < 0 or hi > n:
            dropped += 1
            continue
        beats.append(
            BeatTensor(
                record.samples[:, lo:hi].copy(), lab, record.sample_rate, record.record_id
            )
        )
    return beats, dropped


def downsample(x, fs_in, fs_out):
    """Zero-phase FIR low-pass at 0.45 * fs_out, then keep every (fs_in / fs_out)-th sample."""
    x = _as_1d(x)
    ratio = fs_in / fs_out
    if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
        raise ValueError(f"fs_in/fs_out must be a positive integer, got {fs_in}/{fs_out}")
    ratio = int(round(ratio))
    if ratio == 1:
        return x.copy()
    taps = min(16 * ratio + 1, len(x) if len(x) % 2 else len(x) - 1)
    taps = max(taps, 1)
    if taps >= 3:
        h = sps.firwin(taps, 0.45 * fs_out, fs=fs_in)
        half = taps // 2
        padded = np.pad(x, half, mode="reflect")
        x = np.convolve(padded, h, mode="valid")
    return x[::ratio]


def preprocess_record(record, window_n=5, notch_hz=50.0, notch_q=30.0):
    """Moving-average smoothing followed by the powerline notch on every lead."""
    fs = record.sample_rate
    out = []
    for lead in record.samples:
        y = window_filter(lead, window_n)
        if notch_hz and notch_hz < fs / 2:
            y = notch_filter(y, NotchSpec(notch_hz, notch_q, fs))
        elif notch_hz:
            log.warning("notch at %.1f Hz skipped: not below Nyquist for fs=%.1f Hz", notch_hz, fs)
        out.append(y)
    return RawRecord(np.stack(out), fs, record.record_id, record.label)


def downsample_beat(beat, fs_out):
    if beat.sample_rate == fs_out:
        return beat
    samples = np.stack([downsample(lead, beat.sample_rate, fs_out) for lead in beat.samples])
    return BeatTensor(samples, beat.label, fs_out, beat.source_id)
