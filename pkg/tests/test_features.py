import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from geoaug.beats import BeatTensor
from geoaug.features import (
    FREQ_FEATURES,
    TIME_FEATURES,
    FeatureConfig,
    FeatureVector,
    SpectrumView,
    assemble_vector,
    feature_matrix,
    freq_features,
    histogram_mode,
    time_features,
)

T = {name: k for k, name in enumerate(TIME_FEATURES)}


def z_oracle(F, f):
    """Loop evaluation of the ten spectral statistics, no conventions needed."""
    N = len(F)
    z1 = sum(F) / N
    z2 = sum((v - z1) ** 2 for v in F) / (N - 1)
    z3 = -sum((v / (z1 * N)) * math.log2(v / (z1 * N)) for v in F)
    z4 = sum(v * v for v in F) / N
    z5 = sum(((v - z1) / math.sqrt(z2)) ** 3 for v in F) / N
    z6 = sum(((v - z1) / math.sqrt(z2)) ** 4 for v in F) / N
    s = sum(F)
    z7 = sum(a - v for a, v in zip(f, F)) / s
    z8 = math.sqrt(sum((a - z6) ** 2 * v for a, v in zip(f, F)) / s)
    z9 = sum((a - v) ** 3 * v for a, v in zip(f, F)) / s
    z10 = sum((a - v) ** 4 * v for a, v in zip(f, F)) / s
    return [z1, z2, z3, z4, z5, z6, z7, z8, z9, z10]


def test_feature_names():
    assert len(TIME_FEATURES) == 13 and len(FREQ_FEATURES) == 9


# --- time features --------------------------------------------------------------

def test_time_constant():
    v = time_features([-2.5] * 4)
    for name in ("max", "min", "mean", "median", "mode"):
        assert v[T[name]] == -2.5
    assert v[T["range"]] == 0 and v[T["std"]] == 0
    assert v[T["rms"]] == 2.5 and v[T["mean_square"]] == 6.25
    assert v[T["skewness"]] == 0 and v[T["kurtosis"]] == 0


def test_time_hand_values():
    v = time_features([1.0, 2.0, 3.0])
    assert v[T["mean"]] == pytest.approx(2.0)
    assert v[T["std"]] == pytest.approx(math.sqrt(2 / 3))
    assert v[T["rms"]] == pytest.approx(math.sqrt(14 / 3))
    assert v[T["range"]] == 2.0 and v[T["median"]] == 2.0
    v = time_features([-1.0, 1.0, -1.0, 1.0])
    assert v[T["mean"]] == 0 and v[T["rms"]] == pytest.approx(1.0)
    assert v[T["waveform_factor"]] == pytest.approx(1.0)
    assert v[T["pulse_factor"]] == pytest.approx(1.0)


def test_time_zero_signal_factors():
    v = time_features(np.zeros(10))
    assert v[T["waveform_factor"]] == 0 and v[T["pulse_factor"]] == 0


def test_time_moments_match_scipy(rng):
    for _ in range(10):
        x = rng.gamma(2.0, size=int(rng.integers(5, 80)))
        v = time_features(x)
        assert v[T["skewness"]] == pytest.approx(stats.skew(x), rel=1e-10)
        assert v[T["kurtosis"]] == pytest.approx(stats.kurtosis(x, fisher=True) + 3.0, rel=1e-10)
        assert v[T["std"]] == pytest.approx(np.std(x), rel=1e-12)
        assert v[T["pulse_factor"]] == pytest.approx(np.max(np.abs(x)) / np.mean(np.abs(x)))


def test_histogram_mode():
    x = np.array([0.0, 0.1, 0.1, 0.2, 1.0, 1.6])
    # 16 bins of width 0.1 over [0, 1.6]; bin [0.1, 0.2) holds two samples
    assert histogram_mode(x) == pytest.approx(0.15)
    assert histogram_mode(np.array([0.0, 1.6])) == pytest.approx(0.05)


def test_time_errors():
    with pytest.raises(ValueError):
        time_features([1.0])
    with pytest.raises(ValueError):
        time_features([1.0, np.inf])


@given(
    st.lists(st.floats(-10, 10), min_size=4, max_size=40).filter(lambda v: np.ptp(v) > 1e-3),
    st.floats(0.01, 100),
)
def test_time_scale_equivariance(values, a):
    x = np.asarray(values)
    base, scaled = time_features(x), time_features(a * x)
    for name in ("max", "min", "range", "mean", "median", "mode", "std", "rms"):
        assert scaled[T[name]] == pytest.approx(a * base[T[name]], rel=1e-9, abs=1e-9)
    for name in ("waveform_factor", "pulse_factor", "skewness"):
        assert scaled[T[name]] == pytest.approx(base[T[name]], rel=1e-6, abs=1e-9)


# --- frequency features -----------------------------------------------------------

def test_freq_constant_spectrum():
    z = freq_features(SpectrumView(np.full(6, 2.0), np.arange(6.0)))
    assert z[0] == 2.0 and z[1] == 0.0 and z[3] == 4.0
    assert z[4] == 0.0 and z[5] == 0.0
    assert z[2] == pytest.approx(math.log2(6))


def test_freq_two_bin_example():
    z = freq_features(SpectrumView([1.0, 3.0], [0.0, 1.0]))
    assert (z[0], z[1], z[3]) == (2.0, 2.0, 5.0)


def test_freq_all_zero_spectrum():
    z = freq_features(SpectrumView(np.zeros(5), np.arange(5.0)))
    assert np.array_equal(z, np.zeros(9))


def test_freq_matches_loop_oracle(rng):
    for _ in range(10):
        n = int(rng.integers(2, 40))
        F = rng.uniform(0.01, 3.0, n)
        f = np.sort(rng.uniform(0, 50, n))
        got = freq_features(SpectrumView(F, f), include_z10=True)
        assert np.allclose(got, z_oracle(F.tolist(), f.tolist()), rtol=1e-9, atol=1e-12)


def test_uniform_spectrum_maximizes_entropy(rng):
    n = 16
    top = freq_features(SpectrumView(np.ones(n), np.arange(n)))[2]
    for _ in range(50):
        assert freq_features(SpectrumView(rng.uniform(0, 1, n), np.arange(n)))[2] <= top + 1e-12


def test_spectrum_view_validation():
    assert SpectrumView([1.0, 2.0, 0.0], [0, 1, 2]).N == 3
    with pytest.raises(ValueError):
        SpectrumView([1.0, -1.0], [0, 1])
    with pytest.raises(ValueError):
        SpectrumView([1.0, np.nan], [0, 1])
    with pytest.raises(ValueError):
        freq_features(SpectrumView([1.0], [0.0]))


# --- assembly -------------------------------------------------------------------

def test_twelve_lead_config_dims(rng):
    beat = BeatTensor(rng.normal(size=(12, 50)), 0, 50.0)
    v = assemble_vector(beat, FeatureConfig())
    assert len(v.values) == 864 and v.dims == (600, 156, 108)
    assert np.array_equal(v.block("raw"), beat.samples.ravel())
    assert np.array_equal(v.block("time")[13:26], time_features(beat.samples[1]))
    spec = SpectrumView.of(beat.samples[11], 50.0)
    assert np.array_equal(v.block("freq")[-9:], freq_features(spec))


def test_single_lead_and_downsampling(rng):
    cfg = FeatureConfig(n_leads=1, raw_len=50)
    assert len(assemble_vector(BeatTensor(rng.normal(size=(1, 50)), 0, 50.0), cfg).values) == 72
    # a 100 Hz beat is decimated to 50 samples first
    assert len(assemble_vector(BeatTensor(rng.normal(size=(1, 100)), 0, 100.0), cfg).values) == 72


def test_zero_beat():
    v = assemble_vector(BeatTensor(np.zeros((1, 50)), 0, 50.0), FeatureConfig(n_leads=1))
    assert np.all(v.block("raw") == 0)
    assert np.array_equal(v.block("time"), time_features(np.zeros(50)))
    assert np.all(v.block("freq") == 0)


def test_assembly_errors_and_matrix(rng):
    cfg = FeatureConfig(n_leads=2, raw_len=50)
    with pytest.raises(ValueError, match="leads"):
        assemble_vector(BeatTensor(rng.normal(size=(3, 50)), 0, 50.0), cfg)
    with pytest.raises(ValueError, match="samples"):
        assemble_vector(BeatTensor(rng.normal(size=(2, 40)), 0, 50.0), cfg)
    with pytest.raises(ValueError):
        FeatureVector(np.zeros(5), dims=(2, 2, 2))
    beats = [BeatTensor(rng.normal(size=(2, 50)), 0, 50.0) for _ in range(3)]
    m = feature_matrix(beats, cfg)
    assert m.shape == (3, sum(cfg.dims))
    assert np.array_equal(m, feature_matrix(beats, cfg))


@given(st.integers(1, 4), st.integers(8, 60), st.booleans())
def test_length_is_sum_of_dims(n_leads, raw_len, z10):
    cfg = FeatureConfig(n_leads=n_leads, raw_len=raw_len, include_z10=z10)
    beat = BeatTensor(np.random.default_rng(raw_len).normal(size=(n_leads, raw_len)), 0, 50.0)
    v = assemble_vector(beat, cfg)
    assert len(v.values) == sum(cfg.dims)
