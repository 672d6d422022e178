"""Synthetic ECG: Gaussian-bump beats (P, QRS, T), multi-beat records with
known R positions, and a small imbalanced morphology benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beats import BeatTensor
from .signal import RawRecord

WAVES = ("P", "QRS", "T")

# offsets from the R peak (s), Gaussian sigmas (s), amplitudes (mV)
_NORMAL_OFFSETS = np.array([-0.20, 0.0, 0.28])
_NORMAL_WIDTHS = np.array([0.025, 0.018, 0.05])
_NORMAL_AMPS = np.array([0.15, 1.0, 0.30])
# per-lead gain on each wave, cycled when n_leads > 4
_LEAD_GAINS = np.array(
    [[1.0, 1.0, 1.0], [0.8, 1.3, 0.9], [0.6, 0.7, 1.2], [1.1, 0.5, 0.6]]
)


@dataclass(frozen=True)
class WaveParams:
    """Bump parameters of one beat.

    amplitudes : (n_leads, 3) array, mV per lead for P, QRS, T
    centers : (3,) seconds from the start of the beat window
    widths : (3,) Gaussian sigmas in seconds
    """

    amplitudes: np.ndarray
    centers: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        amps = np.atleast_2d(np.asarray(self.amplitudes, dtype=np.float64))
        centers = np.asarray(self.centers, dtype=np.float64)
        widths = np.asarray(self.widths, dtype=np.float64)
        if amps.shape[1] != 3 or centers.shape != (3,) or widths.shape != (3,):
            raise ValueError("need amplitudes (n_leads, 3), centers (3,), widths (3,)")
        if not (np.all(np.isfinite(amps)) and np.all(np.isfinite(centers))):
            raise ValueError("bump parameters must be finite")
        if not np.all(widths > 0):
            raise ValueError("bump widths must be > 0")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "widths", widths)

    @property
    def n_leads(self):
        return self.amplitudes.shape[0]

    @classmethod
    def normal(cls, n_leads=1, r_time=0.5):
        gains = _LEAD_GAINS[np.arange(n_leads) % len(_LEAD_GAINS)]
        return cls(gains * _NORMAL_AMPS, r_time + _NORMAL_OFFSETS, _NORMAL_WIDTHS.copy())


def _bumps(params, t):
    """(n_leads, len(t)) sum of the three bumps evaluated at times t."""
    shape = np.exp(-0.5 * ((t[None, :] - params.centers[:, None]) / params.widths[:, None]) ** 2)
    return params.amplitudes @ shape


def r_index(params, sample_rate):
    """Ground-truth R sample: the QRS center rounded to the sampling grid."""
    return int(round(params.centers[1] * sample_rate))


def synth_beat(params, beat_len, sample_rate, noise_sigma=0.0, seed=0, label=0, source_id=""):
    """One beat: three Gaussian bumps per lead plus white noise of std ``noise_sigma``."""
    if beat_len < 8:
        raise ValueError("beat_len must be >= 8")
    duration = beat_len / sample_rate
    if np.any(params.centers < 0) or np.any(params.centers >= duration):
        raise ValueError(f"bump centers must lie inside the {duration:.3f} s beat window")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    t = np.arange(beat_len) / sample_rate
    x = _bumps(params, t)
    if noise_sigma > 0:
        x = x + noise_sigma * np.random.default_rng(seed).standard_normal(x.shape)
    return BeatTensor(x, label, sample_rate, source_id)


def synth_record(
    bpm,
    duration_s=10.0,
    sample_rate=100.0,
    n_leads=1,
    noise_frac=0.05,
    seed=0,
    params=None,
    rr_jitter=0.02,
    record_id="",
):
    """Record of repeated beats at ``bpm`` with white noise.

    Noise std is ``noise_frac`` times the largest QRS amplitude. RR intervals
    vary by a relative ``rr_jitter``.

    Returns
    -------
    record : RawRecord
    r_peaks : ndarray of int
        Sample index of every QRS center.
    """
    if not bpm > 0:
        raise ValueError("bpm must be positive")
    rng = np.random.default_rng(seed)
    params = params or WaveParams.normal(n_leads, r_time=0.0)
    offsets = params.centers - params.centers[1]
    n = int(round(duration_s * sample_rate))
    rr = 60.0 / bpm
    margin = 0.2
    r_times = []
    t_r = margin + rng.uniform(0.0, rr)
    while t_r < duration_s - margin:
        r_times.append(t_r)
        t_r += rr * (1.0 + rr_jitter * rng.uniform(-1.0, 1.0))
    t = np.arange(n) / sample_rate
    x = np.zeros((params.n_leads, n))
    for tr in r_times:
        x += _bumps(WaveParams(params.amplitudes, tr + offsets, params.widths), t)
    sigma = noise_frac * float(np.max(np.abs(params.amplitudes[:, 1])))
    x += sigma * rng.standard_normal(x.shape)
    peaks = np.round(np.asarray(r_times) * sample_rate).astype(int)
    return RawRecord(x, sample_rate, record_id), peaks


# class-specific shifts of (offsets, widths, amplitudes) relative to normal
_CLASS_DELTAS = {
    1: (np.array([0.0, 0.0, 0.04]), np.array([0.0, 0.0, 0.02]), np.array([0.0, -0.35, -0.55])),
    2: (np.array([0.0, 0.02, 0.08]), np.array([0.0, 0.022, 0.01]), np.array([-0.1, -0.2, -0.1])),
}


def synth_dataset(
    counts=(1000, 100, 100),
    n_leads=3,
    sample_rate=100.0,
    beat_len=100,
    beats_per_patient=5,
    noise_frac=0.1,
    seed=0,
    severity_range=(0.3, 1.0),
    patient_spread=3.0,
):
    """Imbalanced morphology benchmark: class 0 is normal, classes 1 and 2
    shift T-wave polarity/QRS height and QRS width respectively.

    Each patient draws a severity from ``severity_range`` that scales how
    far its template moves from normal, plus its own amplitude, width and
    timing spread (multiplied by ``patient_spread``), so mild patients
    overlap the normal class. Beats of a patient share ``source_id``.
    """
    rng = np.random.default_rng(seed)
    r_time = 0.5 * beat_len / sample_rate
    base = WaveParams.normal(n_leads, r_time)
    beats = []
    for cls, count in enumerate(counts):
        n_patients = max(1, int(np.ceil(count / beats_per_patient)))
        made = 0
        for p in range(n_patients):
            severity = rng.uniform(*severity_range) if cls else 0.0
            d_off, d_wid, d_amp = _CLASS_DELTAS.get(cls, (0.0, 0.0, 0.0))
            offsets = _NORMAL_OFFSETS + severity * d_off + rng.normal(0.0, 0.01 * patient_spread, 3)
            widths = (_NORMAL_WIDTHS + severity * d_wid) * rng.lognormal(0.0, 0.1 * patient_spread, 3)
            amps = base.amplitudes * (1.0 + severity * d_amp / _NORMAL_AMPS)
            amps = amps * rng.lognormal(0.0, 0.15 * patient_spread, amps.shape)
            sid = f"c{cls}p{p:04d}"
            for _ in range(min(beats_per_patient, count - made)):
                jitter = rng.normal(0.0, 0.005, 3)
                beat_params = WaveParams(
                    amps * rng.lognormal(0.0, 0.05, amps.shape),
                    r_time + offsets + jitter,
                    widths,
                )
                sigma = noise_frac * float(np.max(np.abs(beat_params.amplitudes[:, 1])))
                beats.append(
                    synth_beat(
                        beat_params,
                        beat_len,
                        sample_rate,
                        sigma,
                        seed=int(rng.integers(2**63)),
                        label=cls,
                        source_id=sid,
                    )
                )
                made += 1
    return beats
