"""Per-lead time- and frequency-domain statistics and the flat beat vector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal import downsample_beat, fft_spectrum

TIME_FEATURES = (
    "max", "min", "range", "mean", "median", "mode", "std", "rms",
    "mean_square", "skewness", "kurtosis", "waveform_factor", "pulse_factor",
)
FREQ_FEATURES = tuple(f"Z{k}" for k in range(1, 10))
MODE_BINS = 16


@dataclass(frozen=True)
class SpectrumView:
    """Magnitudes ``F`` at bin frequencies ``f`` (Hz)."""

    F: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.F, dtype=np.float64)
        f = np.asarray(self.f, dtype=np.float64)
        if F.ndim != 1 or F.shape != f.shape:
            raise ValueError("F and f must be 1-D of equal length")
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(f))):
            raise ValueError("spectrum has non-finite entries")
        if np.any(F < 0):
            raise ValueError("magnitudes must be >= 0")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "f", f)

    @property
    def N(self):
        return len(self.F)

    @classmethod
    def of(cls, x, sample_rate=1.0):
        freqs, mags = fft_spectrum(x, sample_rate)
        return cls(mags, freqs)


@dataclass(frozen=True)
class FeatureConfig:
    n_leads: int = 12
    raw_len: int = 50
    fs_out: float = 50.0
    include_z10: bool = False  # debug only; breaks the 9-per-lead layout

    @property
    def n_freq(self):
        return 10 if self.include_z10 else 9

    @property
    def dims(self):
        return (
            self.n_leads * self.raw_len,
            self.n_leads * len(TIME_FEATURES),
            self.n_leads * self.n_freq,
        )


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    layout: tuple = ("raw", "time", "freq")
    dims: tuple = ()

    def __post_init__(self):
        if sum(self.dims) != len(self.values):
            raise ValueError(f"block dims {self.dims} do not add up to {len(self.values)}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector has non-finite entries")

    def block(self, name):
        k = self.layout.index(name)
        start = sum(self.dims[:k])
        return self.values[start : start + self.dims[k]]


def _finite_1d(x, min_len=2):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) < min_len:
        raise ValueError(f"expected a 1-D input of length >= {min_len}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input has non-finite entries")
    return x


def histogram_mode(x, bins=MODE_BINS):
    """Center of the fullest of ``bins`` equal bins over [min, max]; ties go to the lower bin."""
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return lo
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    k = int(np.argmax(counts))
    return 0.5 * (edges[k] + edges[k + 1])


def time_features(lead):
    """The 13 statistics named in ``TIME_FEATURES``, in that order.

    Standard deviation is the population one. Skewness and kurtosis are the
    standardized third and fourth central moments (kurtosis not excess) and
    are 0 for a constant input; the two factors are 0 when mean |x| is 0.
    """
    x = _finite_1d(lead)
    mx, mn = float(x.max()), float(x.min())
    mean = float(x.mean())
    centered = x - mean
    var = float(np.mean(centered**2))
    std = np.sqrt(var)
    ms = float(np.mean(x * x))
    rms = np.sqrt(ms)
    if var > 0:
        skew = float(np.mean(centered**3)) / var**1.5
        kurt = float(np.mean(centered**4)) / var**2
    else:
        skew = kurt = 0.0
    mean_abs = float(np.mean(np.abs(x)))
    if mean_abs > 0:
        waveform = rms / mean_abs
        pulse = float(np.max(np.abs(x))) / mean_abs
    else:
        waveform = pulse = 0.0
    return np.array(
        [mx, mn, mx - mn, mean, float(np.median(x)), histogram_mode(x), std, rms, ms,
         skew, kurt, waveform, pulse]
    )


def freq_features(spec, include_z10=False):
    """Spectral statistics Z1..Z9 (Z10 too if asked) of a magnitude spectrum.

    Z2 uses the 1/(N-1) variance. Z5, Z6 are 0 when Z2 is 0, Z7..Z10 are 0
    when the magnitudes sum to 0, and Z3 treats 0 log 0 as 0 (and is 0 for
    an all-zero spectrum). Z7..Z10 combine f and F exactly as written,
    units notwithstanding; Z8 is centred on Z6.
    """
    F, f, N = spec.F, spec.f, spec.N
    if N < 2:
        raise ValueError("spectrum needs at least 2 bins")
    z1 = F.sum() / N
    z2 = np.sum((F - z1) ** 2) / (N - 1)
    total = F.sum()
    if total > 0:
        p = F / (z1 * N)
        nz = p > 0
        z3 = -float(np.sum(p[nz] * np.log2(p[nz])))
    else:
        z3 = 0.0
    z4 = np.sum(F * F) / N
    if z2 > 0:
        u = (F - z1) / np.sqrt(z2)
        z5 = np.mean(u**3)
        z6 = np.mean(u**4)
    else:
        z5 = z6 = 0.0
    if total > 0:
        d = f - F
        z7 = d.sum() / total
        z8 = np.sqrt(np.sum((f - z6) ** 2 * F) / total)
        z9 = np.sum(d**3 * F) / total
        z10 = np.sum(d**4 * F) / total
    else:
        z7 = z8 = z9 = z10 = 0.0
    out = [z1, z2, z3, z4, z5, z6, z7, z8, z9]
    if include_z10:
        out.append(z10)
    return np.array(out, dtype=np.float64)


def assemble_vector(beat, config=None):
    """Concatenate raw samples, time statistics and spectral statistics of every lead.

    The beat is first decimated to ``config.fs_out`` if needed. Blocks are
    ordered raw | time | freq, each holding all leads in lead order.
    """
    config = config or FeatureConfig()
    if beat.n_leads != config.n_leads:
        raise ValueError(f"beat has {beat.n_leads} leads, config expects {config.n_leads}")
    if beat.sample_rate != config.fs_out:
        beat = downsample_beat(beat, config.fs_out)
    if beat.beat_len != config.raw_len:
        raise ValueError(f"beat has {beat.beat_len} samples, config expects {config.raw_len}")
    raw = beat.samples.ravel()
    tf = np.concatenate([time_features(lead) for lead in beat.samples])
    ff = np.concatenate(
        [freq_features(SpectrumView.of(lead, config.fs_out), config.include_z10)
         for lead in beat.samples]
    )
    return FeatureVector(np.concatenate([raw, tf, ff]), dims=config.dims)


def feature_matrix(beats, config=None):
    """Stack ``assemble_vector`` over beats into an (n_beats, dim) array."""
    return np.stack([assemble_vector(b, config).values for b in beats])
