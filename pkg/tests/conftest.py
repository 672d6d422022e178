import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_weights(rng, n):
    w = rng.uniform(0.05, 1.0, n)
    return w / w.sum()


def bump_density_lead(rng, grid_len=50):
    """Sum of 1-3 Gaussian bumps on [0, 1] sampled on ``grid_len`` points."""
    x = np.linspace(0.0, 1.0, grid_len)
    y = np.zeros(grid_len)
    for _ in range(rng.integers(1, 4)):
        c = rng.uniform(0.1, 0.9)
        w = rng.uniform(0.03, 0.15)
        y += rng.uniform(0.2, 1.0) * np.exp(-0.5 * ((x - c) / w) ** 2)
    return y


def shape_triplet(rng, beat_len=100, sample_rate=100.0):
    """(ref, shifted, reshaped) single-lead beats.

    ``shifted`` is ``ref`` moved in time; ``reshaped`` adds a second bump
    elsewhere, scaled so its per-sample squared distance to ``ref`` is 90% of
    the shifted pair's.
    """
    t = np.arange(beat_len) / sample_rate
    dur = beat_len / sample_rate
    w = rng.uniform(0.015, 0.03) * dur
    c = rng.uniform(0.3, 0.45) * dur
    s = rng.uniform(0.03, 0.08) * dur
    d = c + rng.uniform(0.25, 0.4) * dur
    bump = lambda center, width: np.exp(-0.5 * ((t - center) / width) ** 2)  # noqa: E731
    ref = bump(c, w)
    shifted = bump(c + s, w)
    extra = bump(d, rng.uniform(1.0, 2.0) * w)
    target = 0.9 * np.sum((ref - shifted) ** 2)
    reshaped = ref + np.sqrt(target / np.sum(extra**2)) * extra
    return ref, shifted, reshaped


def dominant_peaks(x, frac=0.3):
    """Local maxima whose prominence is at least ``frac`` of the signal maximum."""
    from scipy.signal import find_peaks

    x = np.asarray(x, dtype=float)
    peaks, _ = find_peaks(np.concatenate(([-np.inf], x, [-np.inf])), prominence=frac * x.max())
    return len(peaks)


def single_peak_beat(rng, beat_len=100, sample_rate=100.0, label=0, source_id=""):
    """One QRS-like bump: sigma 10-20 ms, amplitude 0.8-1.2, center offset 0-100 ms."""
    from geoaug.beats import BeatTensor

    t = np.arange(beat_len) / sample_rate
    c = 0.3 + rng.uniform(0.0, 0.1)
    w = rng.uniform(0.010, 0.020)
    x = rng.uniform(0.8, 1.2) * np.exp(-0.5 * ((t - c) / w) ** 2)
    return BeatTensor(x[None, :], label, sample_rate, source_id)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
