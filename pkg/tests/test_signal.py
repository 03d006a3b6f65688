import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import naive_dft
from codesig.signal import (
    Signal,
    bytes_to_signal,
    extract_features,
    fft_magnitude,
    preprocess,
)


def test_empty_bytes():
    assert len(bytes_to_signal(b"", 2)) == 0


def test_bigram_values():
    s = bytes_to_signal(bytes([0x00, 0x01, 0x02]), 2)
    assert list(s.samples) == [1 / 65536, 258 / 65536]
    assert s.source_len == 3


def test_single_byte_has_no_bigram():
    assert len(bytes_to_signal(b"\xff", 2)) == 0


def test_unigram_and_trigram():
    assert list(bytes_to_signal(b"\x80\x01", 1).samples) == [0.5, 1 / 256]
    assert list(bytes_to_signal(b"\x01\x02\x03", 3).samples) == [0x010203 / 256**3]


def test_bad_ngram_size():
    with pytest.raises(ValueError):
        bytes_to_signal(b"abc", 0)


@given(st.binary(max_size=200), st.integers(1, 6))
def test_signal_length_and_range(data, n):
    s = bytes_to_signal(data, n)
    assert len(s) == max(0, len(data) - n + 1)
    assert np.all((s.samples >= 0) & (s.samples < 1))


def test_max_bytes_stay_below_one():
    assert bytes_to_signal(b"\xff" * 8, 6).samples.max() < 1


@given(st.binary(max_size=100))
def test_raw_is_identity(data):
    s = bytes_to_signal(data)
    assert preprocess(s, "raw") == s
    assert preprocess(preprocess(s)) == preprocess(s)


def test_constant_window():
    mags = fft_magnitude(np.full(8, 0.25))
    assert mags.shape == (4,)
    assert mags[0] == pytest.approx(2.0, abs=1e-9)
    assert np.allclose(mags[1:], 0, atol=1e-9)


def test_cosine_peak():
    t = np.arange(8)
    mags = fft_magnitude(np.cos(2 * np.pi * 2 * t / 8))
    assert int(np.argmax(mags)) == 2
    assert mags[2] == pytest.approx(4.0, abs=1e-9)
    ref = np.abs(naive_dft(np.cos(2 * np.pi * 2 * t / 8)))[:4]
    assert np.allclose(mags, ref, atol=1e-9)


@pytest.mark.parametrize("bad", [np.zeros(6), np.zeros(0), np.zeros((2, 4))])
def test_window_must_be_power_of_two(bad):
    with pytest.raises(ValueError):
        fft_magnitude(bad)


def test_declared_length_mismatch():
    with pytest.raises(ValueError):
        fft_magnitude(np.zeros(8), 16)


def _rel_err(got, ref):
    return np.max(np.abs(got - ref)) / np.max(np.abs(ref))


@pytest.mark.parametrize("n", [8, 64, 512])
def test_fft_matches_naive_dft(n, rng):
    for _ in range(100):
        x = rng.random(n)
        assert _rel_err(fft_magnitude(x), np.abs(naive_dft(x))[: n // 2]) <= 1e-9


@pytest.mark.parametrize("n", [8, 64, 512])
def test_parseval(n, rng):
    for _ in range(20):
        x = rng.standard_normal(n)
        full = np.abs(naive_dft(x))
        # the half spectrum plus its mirror rebuilds the full one for real input
        half = fft_magnitude(x)
        rebuilt = np.concatenate([half, [abs(np.sum(x * (-1.0) ** np.arange(n)))], half[1:][::-1]])
        assert np.allclose(rebuilt, full, rtol=1e-9, atol=1e-9)
        energy = np.sum(x**2)
        assert abs(energy - np.sum(rebuilt**2) / n) / energy <= 1e-9


def test_empty_signal_gives_zero_vector():
    fv = extract_features(Signal(np.zeros(0), 0), 512)
    assert fv.bins == 256 and fv.window == 512
    assert not fv.values.any()


def test_single_window_equals_its_spectrum():
    x = np.full(512, 0.3)
    fv = extract_features(Signal(x, 513), 512)
    assert np.array_equal(fv.values, fft_magnitude(x))


def test_two_windows_average(rng):
    w1, w2 = rng.random(64), rng.random(64)
    fv = extract_features(Signal(np.concatenate([w1, w2]), 129), 64)
    expected = (np.abs(naive_dft(w1))[:32] + np.abs(naive_dft(w2))[:32]) / 2
    assert np.allclose(fv.values, expected, rtol=1e-9, atol=1e-12)


def test_tail_is_zero_padded(rng):
    x = rng.random(70)
    fv = extract_features(Signal(x, 71), 64)
    tail = np.zeros(64)
    tail[:6] = x[64:]
    expected = (np.abs(naive_dft(x[:64]))[:32] + np.abs(naive_dft(tail))[:32]) / 2
    assert np.allclose(fv.values, expected, rtol=1e-9, atol=1e-12)


def test_window_order_does_not_matter(rng):
    windows = [rng.random(64) for _ in range(5)]
    a = extract_features(Signal(np.concatenate(windows), 0), 64)
    b = extract_features(Signal(np.concatenate(windows[::-1]), 0), 64)
    assert np.allclose(a.values, b.values, rtol=1e-12, atol=0)


@given(st.binary(max_size=3000))
def test_features_finite_and_nonnegative(data):
    fv = extract_features(bytes_to_signal(data), 128)
    assert fv.bins == 64
    assert np.all(np.isfinite(fv.values)) and np.all(fv.values >= 0)


def test_features_deterministic():
    data = bytes(range(256)) * 9
    assert extract_features(bytes_to_signal(data)) == extract_features(bytes_to_signal(data))
    assert not math.isnan(extract_features(bytes_to_signal(data)).values.sum())
