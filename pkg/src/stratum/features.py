"""Windowed time/frequency features for fused sensor magnitudes.

Each sensor window yields 27 values in this fixed order::

    0  mean            7  dc                 18     energy
    1  std             8-12  peak magnitudes 19-22  spectral mean/std/skew/kurt
    2  min             13-17 peak freqs      23-26  amplitude mean/std/skew/kurt
    3  max
    4  mode
    5  range
    6  mean-crossing rate

Three sensors per body position give 81 columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .data import Domain, RawRecording
from .errors import ValidationError

FEATURES_PER_SENSOR = 27
SENSORS_PER_POSITION = 3
NUM_PEAKS = 5
MODE_BINS = 10
MIN_WINDOW = 8

FEATURE_NAMES = (
    ["mean", "std", "min", "max", "mode", "range", "mean_crossing_rate", "dc"]
    + [f"peak{i}_magnitude" for i in range(1, NUM_PEAKS + 1)]
    + [f"peak{i}_frequency" for i in range(1, NUM_PEAKS + 1)]
    + ["energy"]
    + [f"spectral_{s}" for s in ("mean", "std", "skewness", "kurtosis")]
    + [f"amplitude_{s}" for s in ("mean", "std", "skewness", "kurtosis")]
)
assert len(FEATURE_NAMES) == FEATURES_PER_SENSOR

# Spectral bins below this fraction of the largest coefficient are round-off.
_PEAK_FLOOR = 1e-10


@dataclass(frozen=True)
class WindowingConfig:
    window_seconds: float = 5.0
    overlap_fraction: float = 0.5
    label_rule: Literal["majority-label", "center-label"] = "majority-label"

    def __post_init__(self):
        if not self.window_seconds > 0:
            raise ValidationError("window_seconds must be positive")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValidationError("overlap_fraction must be in [0, 1)")
        if self.label_rule not in ("majority-label", "center-label"):
            raise ValidationError(f"unknown label_rule {self.label_rule!r}")

    def window_length(self, sample_rate: float) -> int:
        n = int(round(self.window_seconds * sample_rate))
        if n < MIN_WINDOW:
            raise ValidationError(
                f"window of {self.window_seconds}s at {sample_rate} Hz has {n} samples; need >= {MIN_WINDOW}"
            )
        return n

    def stride(self, sample_rate: float) -> int:
        return max(1, int(round(self.window_length(sample_rate) * (1.0 - self.overlap_fraction))))


def fuse_axes(x, y, z) -> np.ndarray:
    """Magnitude of a tri-axial signal, sample by sample."""
    x, y, z = (np.asarray(a, dtype=np.float64) for a in (x, y, z))
    if not (x.shape == y.shape == z.shape):
        raise ValidationError(f"axis lengths differ: {x.shape}, {y.shape}, {z.shape}")
    return np.sqrt(x * x + y * y + z * z)


def _window_label(labels: np.ndarray, rule: str) -> int:
    if rule == "center-label":
        return int(labels[len(labels) // 2])
    values, counts = np.unique(labels, return_counts=True)
    return int(values[np.argmax(counts)])  # ties go to the lowest class id


def window_bounds(n_samples: int, sample_rate: float, cfg: WindowingConfig) -> list[tuple[int, int]]:
    length = cfg.window_length(sample_rate)
    if n_samples < length:
        raise ValidationError(f"recording has {n_samples} samples, shorter than one window ({length})")
    step = cfg.stride(sample_rate)
    return [(s, s + length) for s in range(0, n_samples - length + 1, step)]


def window_slices(recording: RawRecording, cfg: WindowingConfig) -> list[tuple[np.ndarray, int]]:
    """Cut a recording into (window, label) pairs; window is (length, channels)."""
    stacked = np.column_stack([recording.channels[c] for c in recording.channel_names])
    out = []
    for a, b in window_bounds(len(recording), recording.sample_rate, cfg):
        out.append((stacked[a:b], _window_label(recording.labels[a:b], cfg.label_rule)))
    return out


def _moments(values: np.ndarray, weights: np.ndarray | None = None) -> tuple[float, float, float, float]:
    """Mean, std, skewness, kurtosis (population, non-excess).

    Zero-variance inputs report skewness = kurtosis = 0.
    """
    if weights is None:
        weights = np.full(values.shape, 1.0 / values.size)
    mean = float(np.sum(weights * values))
    dev = values - mean
    var = float(np.sum(weights * dev * dev))
    std = float(np.sqrt(max(var, 0.0)))
    if std <= 1e-12 * max(1.0, abs(mean)):
        return mean, 0.0, 0.0, 0.0
    skew = float(np.sum(weights * dev**3)) / std**3
    kurt = float(np.sum(weights * dev**4)) / var**2
    return mean, std, skew, kurt


def _mode(w: np.ndarray, lo: float, hi: float) -> float:
    if hi == lo:
        return lo
    counts, edges = np.histogram(w, bins=MODE_BINS, range=(lo, hi))
    k = int(np.argmax(counts))
    return 0.5 * (edges[k] + edges[k + 1])


def _spectral_peaks(mag: np.ndarray, freqs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The NUM_PEAKS largest local maxima of ``mag`` (DC already removed)."""
    n = mag.size
    left = np.empty(n, dtype=bool)
    right = np.empty(n, dtype=bool)
    left[0] = True
    left[1:] = mag[1:] > mag[:-1]
    right[-1] = True
    right[:-1] = mag[:-1] >= mag[1:]
    idx = np.flatnonzero(left & right & (mag > 0))
    order = idx[np.lexsort((idx, -mag[idx]))][:NUM_PEAKS]
    peak_mag = np.zeros(NUM_PEAKS)
    peak_freq = np.zeros(NUM_PEAKS)
    peak_mag[: order.size] = mag[order]
    peak_freq[: order.size] = freqs[order]
    return peak_mag, peak_freq


def extract_sensor_features(window, sample_rate: float) -> np.ndarray:
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 1 or w.size < MIN_WINDOW:
        raise ValidationError(f"window must be 1-D with >= {MIN_WINDOW} samples")
    if not np.all(np.isfinite(w)):
        raise ValidationError("window contains non-finite values")
    n = w.size
    lo, hi = float(w.min()), float(w.max())
    amp_mean, amp_std, amp_skew, amp_kurt = _moments(w)

    above = w > amp_mean
    below = w < amp_mean
    crossings = np.count_nonzero((above[:-1] & below[1:]) | (below[:-1] & above[1:]))

    spectrum = np.abs(np.fft.rfft(w)) / n
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    dc = float(spectrum[0])
    mag = spectrum[1:].copy()
    mag[mag <= _PEAK_FLOOR * float(spectrum.max())] = 0.0
    peak_mag, peak_freq = _spectral_peaks(mag, freqs[1:])

    total = mag.sum()
    if total > 0:
        spec_moments = _moments(freqs[1:], mag / total)
    else:
        spec_moments = (0.0, 0.0, 0.0, 0.0)

    return np.concatenate(
        [
            [amp_mean, amp_std, lo, hi, _mode(w, lo, hi), hi - lo, crossings / (n - 1), dc],
            peak_mag,
            peak_freq,
            [float(np.dot(w, w)) / n],
            spec_moments,
            [amp_mean, amp_std, amp_skew, amp_kurt],
        ]
    )


def extract_position_features(recording: RawRecording, cfg: WindowingConfig = WindowingConfig()) -> Domain:
    """81-column feature matrix, one row per window, for a 3-sensor position."""
    if len(recording.channels) != SENSORS_PER_POSITION:
        raise ValidationError(
            f"expected {SENSORS_PER_POSITION} fused channels, got {len(recording.channels)}"
        )
    rows, labels = [], []
    for window, label in window_slices(recording, cfg):
        rows.append(
            np.concatenate(
                [extract_sensor_features(window[:, j], recording.sample_rate) for j in range(window.shape[1])]
            )
        )
        labels.append(label)
    return Domain(np.vstack(rows), np.asarray(labels), recording.position_id, recording.dataset_id)
