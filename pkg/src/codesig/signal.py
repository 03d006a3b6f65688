"""Byte n-gram signals and their FFT magnitude signatures."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

DEFAULT_NGRAM = 2
DEFAULT_WINDOW = 512
# larger grams no longer fit a float64 mantissa, which could round a sample up to 1.0
MAX_NGRAM = 6


class Preprocessing(str, enum.Enum):
    RAW = "raw"


@dataclass(frozen=True, eq=False)
class Signal:
    samples: np.ndarray
    source_len: int

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return self.source_len == other.source_len and np.array_equal(self.samples, other.samples)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    window: int

    @property
    def bins(self) -> int:
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.window == other.window and np.array_equal(self.values, other.values)


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def bytes_to_signal(content: bytes, n: int = DEFAULT_NGRAM) -> Signal:
    """Map every n-gram (step 1) to its big-endian value divided by 256**n."""
    if not 1 <= n <= MAX_NGRAM:
        raise ValueError(f"n-gram size must be in [1, {MAX_NGRAM}], got {n}")
    raw = np.frombuffer(content, dtype=np.uint8)
    count = max(0, len(raw) - n + 1)
    acc = np.zeros(count, dtype=np.float64)
    for i in range(n):
        acc = acc * 256.0 + raw[i : i + count]
    return Signal(acc / float(256**n), len(content))


def preprocess(signal: Signal, mode: Preprocessing | str = Preprocessing.RAW) -> Signal:
    mode = Preprocessing(mode)
    if mode is Preprocessing.RAW:
        return signal
    raise ValueError(f"unsupported preprocessing {mode}")


def _magnitudes(frames: np.ndarray) -> np.ndarray:
    # frames: (k, N) real; returns (k, N/2)
    half = frames.shape[-1] // 2
    return np.abs(np.fft.rfft(frames, axis=-1)[..., :half])


def fft_magnitude(window_samples, n: int | None = None) -> np.ndarray:
    """Return |X_k| for k in [0, N/2) of one untapered window of N samples."""
    x = np.asarray(window_samples, dtype=np.float64)
    if n is None:
        n = len(x)
    if not _is_pow2(n):
        raise ValueError(f"window size must be a power of two, got {n}")
    if x.ndim != 1 or len(x) != n:
        raise ValueError(f"expected {n} samples, got {x.shape}")
    return _magnitudes(x)


def extract_features(signal: Signal, window: int = DEFAULT_WINDOW) -> FeatureVector:
    """Average the magnitude spectra of consecutive non-overlapping windows.

    The tail window is zero-padded. An empty signal gives the zero vector.
    """
    if not _is_pow2(window):
        raise ValueError(f"window size must be a power of two, got {window}")
    samples = np.asarray(signal.samples, dtype=np.float64)
    if len(samples) == 0:
        return FeatureVector(np.zeros(window // 2), window)
    frames = -(-len(samples) // window)
    padded = np.zeros(frames * window)
    padded[: len(samples)] = samples
    mags = _magnitudes(padded.reshape(frames, window))
    return FeatureVector(mags.mean(axis=0), window)


def file_features(
    content: bytes,
    n: int = DEFAULT_NGRAM,
    window: int = DEFAULT_WINDOW,
    mode: Preprocessing | str = Preprocessing.RAW,
) -> FeatureVector:
    """Full signal pipeline for one file's bytes."""
    return extract_features(preprocess(bytes_to_signal(content, n), mode), window)
