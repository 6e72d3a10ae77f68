"""Repetition counting: spectral smoothing, peak detection, fusion.

Counting runs per exercise segment: pick a source channel, optionally
low-pass it by zeroing FFT bins above a class-dependent cutoff, then
count peaks above a relative threshold with a minimum spacing.  The
capacitive channel of the leg pipeline is counted raw (no smoothing);
everything else is smoothed first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DomainError
from .types import FAST_GYM_CLASSES, GYM12, LEG7, NOMINAL_PERIOD_S

__all__ = [
    "PeakConfig",
    "fft_smooth",
    "detect_peaks",
    "counting_accuracy",
    "count_source",
    "fuse_counts",
    "peak_config_for_class",
    "COUNT_SOURCES",
]

COUNT_SOURCES = (
    "cap_raw",
    "acc_x", "acc_y", "acc_z",
    "gyro_x", "gyro_y", "gyro_z",
    "acc_mag", "gyro_mag",
)


@dataclass(frozen=True)
class PeakConfig:
    """Peak-detection parameters.

    ``rel_threshold``: accept only maxima at or above this fraction of the
    series maximum.  ``min_distance_s``: minimum spacing between accepted
    peaks.  ``smoothing_cutoff_hz``: low-pass cutoff applied before
    detection; None skips smoothing entirely (raw counting).
    """

    rel_threshold: float = 0.3
    min_distance_s: float = 0.5
    smoothing_cutoff_hz: float | None = 2.5

    def __post_init__(self) -> None:
        if not 0.0 < self.rel_threshold <= 1.0:
            raise DomainError("rel_threshold must lie in (0, 1]")
        if self.min_distance_s < 0:
            raise DomainError("min_distance_s must be non-negative")
        if self.smoothing_cutoff_hz is not None and not self.smoothing_cutoff_hz > 0:
            raise DomainError("smoothing_cutoff_hz must be positive when given")


def fft_smooth(series: np.ndarray, cutoff_hz: float, sample_rate_hz: float) -> np.ndarray:
    """Low-pass a series by zeroing all FFT bins strictly above the cutoff.

    Exact projection: bins at or below the cutoff (including DC) pass
    through unchanged, so applying the smoother twice equals applying it
    once.  The cutoff must stay below the Nyquist frequency.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size < 4:
        raise DomainError("fft_smooth expects a 1-D series of at least 4 samples")
    if not np.isfinite(x).all():
        raise DomainError("fft_smooth input contains non-finite values")
    if not sample_rate_hz > 0:
        raise DomainError("sample_rate_hz must be positive")
    if not 0 < cutoff_hz < sample_rate_hz / 2:
        raise DomainError(
            f"cutoff {cutoff_hz} Hz must lie in (0, Nyquist={sample_rate_hz / 2} Hz)"
        )
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(x.size, d=1.0 / sample_rate_hz)
    spec[freqs > cutoff_hz] = 0.0
    return np.fft.irfft(spec, n=x.size)


def detect_peaks(series: np.ndarray, config: PeakConfig, sample_rate_hz: float) -> np.ndarray:
    """Indices of accepted peaks, ascending.

    A peak is a maximal run of equal values strictly above both
    neighbouring values (series edges never qualify; an all-equal series
    has no peaks); the run's first index represents it.  Candidates below
    ``rel_threshold * max(series)`` are dropped, and the rest are greedily
    thinned tallest-first so accepted peaks are at least
    ``min_distance_s`` apart (the higher peak of a conflict survives).
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise DomainError("detect_peaks expects a 1-D series")
    if not sample_rate_hz > 0:
        raise DomainError("sample_rate_hz must be positive")
    n = x.size
    if n < 3:
        return np.empty(0, dtype=np.intp)
    if not np.isfinite(x).all():
        raise DomainError("detect_peaks input contains non-finite values")

    candidates: list[int] = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and x[j + 1] == x[i]:
            j += 1
        if i > 0 and j < n - 1 and x[i - 1] < x[i] and x[j + 1] < x[i]:
            candidates.append(i)
        i = j + 1

    if not candidates:
        return np.empty(0, dtype=np.intp)
    threshold = config.rel_threshold * float(x.max())
    candidates = [c for c in candidates if x[c] >= threshold]
    if not candidates:
        return np.empty(0, dtype=np.intp)

    min_gap = config.min_distance_s * sample_rate_hz - 1e-9
    accepted: list[int] = []
    for c in sorted(candidates, key=lambda c: (-x[c], c)):
        if all(abs(c - a) >= min_gap for a in accepted):
            accepted.append(c)
    return np.array(sorted(accepted), dtype=np.intp)


def counting_accuracy(count_detected: float, count_real: float) -> float:
    """1 - |detected - real| / real.  Unbounded below; 1.0 means exact."""
    if not count_real > 0:
        raise DomainError("count_real must be positive")
    return 1.0 - abs(count_detected - count_real) / count_real


def _select_source(channels: Mapping[str, np.ndarray], source: str) -> np.ndarray:
    if source == "cap_raw":
        # The capacitive deviation is bipolar around the resting level and
        # the lobe balance depends on movement speed (a fast capacitance
        # change makes the initial jump dominate, a slow one spreads it).
        # Repetitions are counted on the dominant polarity so every
        # repetition contributes exactly one countable excursion.
        x = np.asarray(channels["cap"], dtype=np.float64)
        if x.size and float(np.max(x)) < float(-np.min(x)):
            return -x
        return x
    if source in ("acc_mag", "gyro_mag"):
        g = source.split("_")[0]
        try:
            cols = [np.asarray(channels[f"{g}_{ax}"], dtype=np.float64) for ax in "xyz"]
        except KeyError as e:
            raise DomainError(f"channel {e.args[0]!r} missing for source {source!r}") from None
        return np.sqrt(cols[0] ** 2 + cols[1] ** 2 + cols[2] ** 2)
    if source in channels:
        return np.asarray(channels[source], dtype=np.float64)
    raise DomainError(f"unknown counting source {source!r} (have {sorted(channels)})")


def count_source(
    channels: Mapping[str, np.ndarray],
    source: str,
    config: PeakConfig,
    sample_rate_hz: float,
) -> int:
    """Count repetitions on one source channel of a single-class segment.

    Pipeline: select (or combine into a magnitude) the source series,
    low-pass it when the config carries a cutoff (raw capacitive counting
    uses ``smoothing_cutoff_hz=None``), then detect peaks.
    """
    if source not in COUNT_SOURCES:
        raise DomainError(f"source must be one of {COUNT_SOURCES}, got {source!r}")
    x = _select_source(channels, source)
    if config.smoothing_cutoff_hz is not None:
        x = fft_smooth(x, config.smoothing_cutoff_hz, sample_rate_hz)
    return int(detect_peaks(x, config, sample_rate_hz).size)


def peak_config_for_class(class_label: str, source: str = "cap_raw") -> PeakConfig:
    """Class- and source-dependent preset.

    Leg classes: spacing at half the nominal cadence; the capacitive
    channel is counted raw, IMU axes are smoothed at 2.5 Hz.  Gym
    classes: sub-second-cadence classes get a 5 Hz cutoff and 0.2 s
    spacing, the rest 2.5 Hz and 0.5 s; all gym sources are smoothed.
    """
    if class_label in LEG7.classes:
        cutoff = None if source == "cap_raw" else 2.5
        return PeakConfig(
            rel_threshold=0.3,
            min_distance_s=NOMINAL_PERIOD_S[class_label] / 2.0,
            smoothing_cutoff_hz=cutoff,
        )
    if class_label in GYM12.classes:
        if class_label in FAST_GYM_CLASSES:
            return PeakConfig(rel_threshold=0.3, min_distance_s=0.2, smoothing_cutoff_hz=5.0)
        return PeakConfig(rel_threshold=0.3, min_distance_s=0.5, smoothing_cutoff_hz=2.5)
    return PeakConfig()


_FUSE_PAIRS = (("acc", "gyro"), ("acc", "cap"), ("gyro", "cap"))


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def fuse_counts(counts: Mapping[str, int], strategy: str) -> int:
    """Combine per-source counts.

    ``imu_mean``: mean of the accelerometer and gyroscope counts.
    ``closest_two_mean``: mean of the two closest of {acc, gyro, cap};
    distance ties prefer a pair containing the capacitive count, then
    fixed enumeration order.  Means are rounded half-up.
    """
    if strategy == "imu_mean":
        missing = {"acc", "gyro"} - set(counts)
        if missing:
            raise DomainError(f"imu_mean requires counts for {sorted(missing)}")
        return _round_half_up((counts["acc"] + counts["gyro"]) / 2.0)
    if strategy == "closest_two_mean":
        missing = {"acc", "gyro", "cap"} - set(counts)
        if missing:
            raise DomainError(f"closest_two_mean requires counts for {sorted(missing)}")
        best = min(
            range(len(_FUSE_PAIRS)),
            key=lambda i: (
                abs(counts[_FUSE_PAIRS[i][0]] - counts[_FUSE_PAIRS[i][1]]),
                0 if "cap" in _FUSE_PAIRS[i] else 1,
                i,
            ),
        )
        a, b = _FUSE_PAIRS[best]
        return _round_half_up((counts[a] + counts[b]) / 2.0)
    raise DomainError(f"unknown fusion strategy {strategy!r}")
