"""Sliding windows and hand-crafted feature extraction.

Two feature pipelines share the windowing stage:

* ``leg``: 9 statistics over 14 derived channels (7 raw + their jerks),
  126 features; the capacitive subset has 18, the inertial subset 108.
* ``gym``: time- and frequency-domain statistics over 36 derived signals
  plus a correlation block, 615 features in total.  The exact composition
  is normative only through the versioned manifest emitted by
  :func:`gym_feature_manifest`; the 615 assertion is a manifest check.

Feature scaling maps every feature to [0, 1] using clip quantiles frozen
on training data; unseen values saturate at the boundaries.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .counting import PeakConfig, detect_peaks
from .errors import DomainError, SchemaError
from .types import DISCARD, Session, Window, get_label_set

__all__ = [
    "WindowingConfig",
    "FeatureVector",
    "slide_windows",
    "jerk",
    "magnitude",
    "extract_features_leg",
    "extract_features_gym",
    "leg_feature_names",
    "gym_feature_names",
    "gym_feature_manifest",
    "leg_feature_manifest",
    "manifest_hash",
    "feature_subset_indices",
    "features_matrix",
    "FeatureNormalizer",
    "normalize_features",
    "burg_ar",
]


@dataclass(frozen=True)
class WindowingConfig:
    """Sliding-window parameters (4 s windows, 2 s steps at defaults)."""

    window_s: float = 4.0
    step_s: float = 2.0
    majority_label_rule: str = "plurality"

    def __post_init__(self) -> None:
        if not self.window_s > 0 or not self.step_s > 0:
            raise DomainError("window_s and step_s must be positive")
        if self.majority_label_rule != "plurality":
            raise DomainError("only the 'plurality' majority rule is supported")


@dataclass
class FeatureVector:
    """Named feature values for one window."""

    names: tuple[str, ...]
    values: np.ndarray
    label: str
    weight: float = 1.0

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.names),):
            raise SchemaError(
                f"feature vector has {self.values.shape[0]} values for {len(self.names)} names"
            )

    @property
    def manifest_hash(self) -> str:
        return manifest_hash(self.names)


def manifest_hash(names: Sequence[str]) -> str:
    """Stable hash of an ordered feature-name list."""
    h = hashlib.sha256()
    for name in names:
        h.update(name.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def slide_windows(session: Session, config: WindowingConfig | None = None) -> list[Window]:
    """Cut a session into majority-labelled windows.

    Window count over n frames is floor((n - w) / s) + 1 (zero when the
    session is shorter than one window).  Windows containing any DISCARD
    frame are dropped.  The majority label is the most frequent frame
    label; ties break toward the earlier class in the session's label-set
    order.
    """
    config = config or WindowingConfig()
    fs = session.sample_rate_hz
    w = int(round(config.window_s * fs))
    s = int(round(config.step_s * fs))
    if w < 2 or s < 1:
        raise DomainError("window/step too short for the session sample rate")
    n = session.n_frames
    if n < w:
        return []
    label_set = get_label_set(session.label_set_id)
    channels = session.channels()

    windows: list[Window] = []
    for k in range((n - w) // s + 1):
        start = k * s
        lab = session.labels[start:start + w]
        if (lab == DISCARD).any():
            continue
        counts = Counter(lab.tolist())
        top = max(counts.values())
        label = min(
            (c for c, v in counts.items() if v == top),
            key=label_set.index,
        )
        windows.append(
            Window(
                channels={name: col[start:start + w] for name, col in channels.items()},
                label=label,
                session_id=session.id,
                start_index=start,
                sample_rate_hz=fs,
            )
        )
    return windows


def jerk(series: np.ndarray, sample_rate_hz: float) -> np.ndarray:
    """First difference scaled to units per second; length shrinks by one."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise DomainError("jerk needs a 1-D series of at least 2 samples")
    if not sample_rate_hz > 0:
        raise DomainError("sample_rate_hz must be positive")
    return np.diff(x) * sample_rate_hz


def magnitude(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Euclidean magnitude of a 3-axis signal."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if not (x.shape == y.shape == z.shape):
        raise DomainError("magnitude needs three equally shaped series")
    return np.sqrt(x * x + y * y + z * z)


# ---------------------------------------------------------------------------
# scalar statistics

def _mad(x: np.ndarray) -> float:
    return float(np.median(np.abs(x - np.median(x))))

def _energy(x: np.ndarray) -> float:
    return float(np.sum(x * x) / x.size)

def _iqr(x: np.ndarray) -> float:
    q75, q25 = np.percentile(x, [75.0, 25.0])
    return float(q75 - q25)

def _sma(x: np.ndarray) -> float:
    # per-sample normalization: mean of absolute values
    return float(np.mean(np.abs(x)))

def _skewness(x: np.ndarray) -> float:
    m = x.mean()
    s2 = np.mean((x - m) ** 2)
    if s2 <= 0:
        return 0.0
    return float(np.mean((x - m) ** 3) / s2 ** 1.5)

def _kurtosis(x: np.ndarray) -> float:
    # excess kurtosis (0 for a normal distribution)
    m = x.mean()
    s2 = np.mean((x - m) ** 2)
    if s2 <= 0:
        return 0.0
    return float(np.mean((x - m) ** 4) / s2 ** 2 - 3.0)

def _entropy_of(p_weights: np.ndarray) -> float:
    total = float(p_weights.sum())
    if total <= 0:
        return 0.0
    p = p_weights / total
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))

def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    # zero-variance inputs have no defined correlation; report 0
    sa, sb = a.std(), b.std()
    if sa <= 0 or sb <= 0:
        return 0.0
    return float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))


def burg_ar(series: np.ndarray, order: int = 4) -> np.ndarray:
    """Burg-method AR coefficients, prediction convention
    x[t] ~ sum_k a[k] * x[t - k].

    Degenerate inputs (too short, zero energy) yield zeros.
    """
    x = np.asarray(series, dtype=np.float64)
    if order < 1:
        raise DomainError("order must be >= 1")
    if x.ndim != 1 or x.size <= order:
        return np.zeros(order)
    f = x[1:].astype(np.float64)
    b = x[:-1].astype(np.float64)
    a = np.zeros(0)
    for _ in range(order):
        den = float(f @ f + b @ b)
        if den <= 0:
            return np.concatenate([a, np.zeros(order - a.size)])
        k = 2.0 * float(f @ b) / den
        a = np.concatenate([a - k * a[::-1], [k]]) if a.size else np.array([k])
        f, b = f - k * b, b - k * f
        f, b = f[1:], b[:-1]
        if f.size == 0:
            break
    if a.size < order:
        a = np.concatenate([a, np.zeros(order - a.size)])
    return a


def _min_peak_distance_s(x: np.ndarray, sample_rate_hz: float) -> float:
    """Smallest spacing between neighbouring peaks; window duration when
    fewer than two peaks exist."""
    cfg = PeakConfig(rel_threshold=0.5, min_distance_s=5.0 / sample_rate_hz,
                     smoothing_cutoff_hz=None)
    idx = detect_peaks(x, cfg, sample_rate_hz)
    if idx.size < 2:
        return x.size / sample_rate_hz
    return float(np.min(np.diff(idx)) / sample_rate_hz)


# ---------------------------------------------------------------------------
# leg pipeline: 9 stats x 14 derived channels

_LEG_BASE_CHANNELS = ("cap", "acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z")
_LEG_STATS = ("mean", "std", "max", "min", "range", "mad", "energy", "iqr", "min_peak_dist_s")


def _leg_channel_names() -> list[str]:
    return list(_LEG_BASE_CHANNELS) + [f"{c}_jerk" for c in _LEG_BASE_CHANNELS]


def leg_feature_names() -> tuple[str, ...]:
    return tuple(f"{ch}_{st}" for ch in _leg_channel_names() for st in _LEG_STATS)


_LEG_NAMES = leg_feature_names()


def _leg_stat_block(x: np.ndarray, sample_rate_hz: float) -> list[float]:
    return [
        float(x.mean()),
        float(x.std()),
        float(x.max()),
        float(x.min()),
        float(x.max() - x.min()),
        _mad(x),
        _energy(x),
        _iqr(x),
        _min_peak_distance_s(x, sample_rate_hz),
    ]


def extract_features_leg(window: Window) -> FeatureVector:
    """126 statistics over the raw channels and their jerks.

    Capacitive subset ("cap*" names): 18 features; inertial subset: 108.
    """
    fs = window.sample_rate_hz
    missing = [c for c in _LEG_BASE_CHANNELS if c not in window.channels]
    if missing:
        raise SchemaError(f"window lacks channels {missing}")
    if window.length < 4:
        raise DomainError("window too short for feature extraction")
    values: list[float] = []
    for ch in _LEG_BASE_CHANNELS:
        values.extend(_leg_stat_block(np.asarray(window.channels[ch], dtype=np.float64), fs))
    for ch in _LEG_BASE_CHANNELS:
        values.extend(_leg_stat_block(jerk(window.channels[ch], fs), fs))
    return FeatureVector(names=_LEG_NAMES, values=np.array(values), label=window.label,
                         weight=window.weight)


# ---------------------------------------------------------------------------
# gym pipeline: t/f statistics over 36 derived signals + correlation block

_GYM_TRIADS = ("acc", "gyro", "acc_jerk", "gyro_jerk")
_GYM_SINGLES = ("cap", "cap_jerk", "acc_mag", "gyro_mag", "acc_jerk_mag", "gyro_jerk_mag")

# per-series time-domain stats (13) and frequency-domain stats (12 + 8 bands)
_GYM_T_STATS = ("mean", "std", "max", "min", "mad", "sma", "energy", "iqr",
                "entropy", "ar1", "ar2", "ar3", "ar4")
_GYM_F_STATS = ("mean", "std", "max", "min", "mad", "sma", "energy", "iqr",
                "entropy", "max_ind", "skewness", "kurtosis",
                "band1", "band2", "band3", "band4", "band5", "band6", "band7", "band8")

_F_BINS = 64          # zero-padded spectrum length used for f-domain stats
_F_PAD = 2 * _F_BINS  # FFT length producing those bins
_N_BANDS = 8

# correlation block: within-triad axis pairs, same-level single-channel pairs,
# and each single channel against its jerk
_GYM_CORR_PAIRS: tuple[tuple[str, str], ...] = tuple(
    [(f"{t}_x", f"{t}_y") for t in _GYM_TRIADS]
    + [(f"{t}_x", f"{t}_z") for t in _GYM_TRIADS]
    + [(f"{t}_y", f"{t}_z") for t in _GYM_TRIADS]
) + (
    ("cap", "acc_mag"), ("cap", "gyro_mag"), ("acc_mag", "gyro_mag"),
    ("cap_jerk", "acc_jerk_mag"), ("cap_jerk", "gyro_jerk_mag"),
    ("acc_jerk_mag", "gyro_jerk_mag"),
    ("cap", "cap_jerk"), ("acc_mag", "acc_jerk_mag"), ("gyro_mag", "gyro_jerk_mag"),
)


def _gym_series_names() -> list[str]:
    names = []
    for t in _GYM_TRIADS:
        names.extend(f"{t}_{ax}" for ax in "xyz")
    names.extend(_GYM_SINGLES)
    return names


_GYM_SERIES = _gym_series_names()  # 18 time series


def gym_feature_names() -> tuple[str, ...]:
    names: list[str] = []
    for sig in _GYM_SERIES:
        names.extend(f"t_{sig}_{st}" for st in _GYM_T_STATS)
    for sig in _GYM_SERIES:
        names.extend(f"f_{sig}_{st}" for st in _GYM_F_STATS)
    names.extend(f"t_{a}__{b}_corr" for a, b in _GYM_CORR_PAIRS)
    return tuple(names)


_GYM_NAMES = gym_feature_names()


def gym_feature_manifest() -> dict:
    """Versioned, ordered description of the 615-feature gym composition.

    This document (not arithmetic on the stat lists) is the normative
    definition of the feature set; the extractor asserts against it.
    """
    features: list[dict] = []
    for sig in _GYM_SERIES:
        for st in _GYM_T_STATS:
            features.append({"name": f"t_{sig}_{st}", "domain": "time",
                             "signals": [sig], "stat": st})
    for sig in _GYM_SERIES:
        for st in _GYM_F_STATS:
            features.append({"name": f"f_{sig}_{st}", "domain": "frequency",
                             "signals": [sig], "stat": st})
    for a, b in _GYM_CORR_PAIRS:
        features.append({"name": f"t_{a}__{b}_corr", "domain": "time",
                         "signals": [a, b], "stat": "corr"})
    return {
        "manifest_version": 1,
        "pipeline": "gym",
        "feature_count": len(features),
        "hash": manifest_hash([f["name"] for f in features]),
        "conventions": {
            "sma": "mean of absolute values (per-sample normalization)",
            "energy": "sum of squares divided by length",
            "entropy": "Shannon entropy (nats) of the normalized magnitude spectrum",
            "spectrum": f"magnitude of the {_F_PAD}-point zero-padded FFT, "
                        f"bins 1..{_F_BINS} (DC dropped)",
            "max_ind": "dominant non-DC bin index of the unpadded window FFT",
            "bands": f"{_N_BANDS} contiguous {_F_BINS // _N_BANDS}-bin energies over "
                     f"the {_F_BINS}-bin spectrum",
            "ar": "Burg method, order 4, prediction convention",
            "kurtosis": "excess (normal = 0)",
            "corr": "Pearson, time domain; zero-variance pairs report 0",
        },
        "features": features,
    }


def leg_feature_manifest() -> dict:
    names = leg_feature_names()
    return {
        "manifest_version": 1,
        "pipeline": "leg",
        "feature_count": len(names),
        "hash": manifest_hash(names),
        "conventions": {
            "energy": "sum of squares divided by length",
            "mad": "median absolute deviation",
            "min_peak_dist_s": "smallest neighbour-peak spacing (rel threshold 0.5, "
                               "min distance 5 samples); window duration when < 2 peaks",
        },
        "features": [{"name": n} for n in names],
    }


def _spectrum64(x: np.ndarray) -> np.ndarray:
    return np.abs(np.fft.rfft(x, n=_F_PAD))[1:_F_BINS + 1]


def _max_ind(x: np.ndarray) -> float:
    spec = np.abs(np.fft.rfft(x))
    if spec.size < 2:
        return 0.0
    return float(np.argmax(spec[1:]) + 1)


def _gym_t_block(x: np.ndarray) -> list[float]:
    raw_spec = np.abs(np.fft.rfft(x))
    ar = burg_ar(x, 4)
    return [
        float(x.mean()), float(x.std()), float(x.max()), float(x.min()),
        _mad(x), _sma(x), _energy(x), _iqr(x),
        _entropy_of(raw_spec[1:]),
        float(ar[0]), float(ar[1]), float(ar[2]), float(ar[3]),
    ]


def _gym_f_block(x: np.ndarray) -> list[float]:
    spec = _spectrum64(x)
    bands = spec.reshape(_N_BANDS, _F_BINS // _N_BANDS)
    band_energy = (bands ** 2).sum(axis=1) / bands.shape[1]
    return [
        float(spec.mean()), float(spec.std()), float(spec.max()), float(spec.min()),
        _mad(spec), _sma(spec), _energy(spec), _iqr(spec),
        _entropy_of(spec),
        _max_ind(x),
        _skewness(spec), _kurtosis(spec),
        *[float(v) for v in band_energy],
    ]


def _gym_derived_series(window: Window) -> dict[str, np.ndarray]:
    fs = window.sample_rate_hz
    ch = {k: np.asarray(v, dtype=np.float64) for k, v in window.channels.items()}
    out: dict[str, np.ndarray] = {}
    for g in ("acc", "gyro"):
        for ax in "xyz":
            out[f"{g}_{ax}"] = ch[f"{g}_{ax}"]
            out[f"{g}_jerk_{ax}"] = jerk(ch[f"{g}_{ax}"], fs)
    out["cap"] = ch["cap"]
    out["cap_jerk"] = jerk(ch["cap"], fs)
    for g in ("acc", "gyro"):
        out[f"{g}_mag"] = magnitude(ch[f"{g}_x"], ch[f"{g}_y"], ch[f"{g}_z"])
        out[f"{g}_jerk_mag"] = magnitude(
            out[f"{g}_jerk_x"], out[f"{g}_jerk_y"], out[f"{g}_jerk_z"]
        )
    return out


def extract_features_gym(window: Window) -> FeatureVector:
    """615 features per window, ordered exactly as the manifest lists them."""
    missing = [c for c in _LEG_BASE_CHANNELS if c not in window.channels]
    if missing:
        raise SchemaError(f"window lacks channels {missing}")
    if window.length < 16:
        raise DomainError("window too short for the gym feature set")
    series = _gym_derived_series(window)

    values: list[float] = []
    for sig in _GYM_SERIES:
        values.extend(_gym_t_block(series[sig]))
    for sig in _GYM_SERIES:
        values.extend(_gym_f_block(series[sig]))
    for a, b in _GYM_CORR_PAIRS:
        xa, xb = series[a], series[b]
        m = min(xa.size, xb.size)  # jerk series are one sample shorter
        values.append(_pearson(xa[:m], xb[:m]))

    assert len(values) == len(_GYM_NAMES), "extractor drifted from the manifest"
    return FeatureVector(names=_GYM_NAMES, values=np.array(values), label=window.label,
                         weight=window.weight)


# ---------------------------------------------------------------------------
# subsets, matrices, scaling

def feature_subset_indices(names: Sequence[str], subset: str) -> np.ndarray:
    """Column indices of the capacitive ("hbc"), inertial ("imu") or full
    ("all") feature subset.

    A feature counts as capacitive when every signal it references is
    capacitive; correlation features mixing modalities belong to neither
    pure subset and appear only in "all".
    """
    if subset == "all":
        return np.arange(len(names))

    def is_cap(name: str) -> bool:
        stripped = name[2:] if name.startswith(("t_", "f_")) else name
        parts = stripped.split("__")
        return all(p.startswith("cap") for p in parts)

    def is_imu(name: str) -> bool:
        stripped = name[2:] if name.startswith(("t_", "f_")) else name
        parts = stripped.split("__")
        return all(p.startswith(("acc", "gyro")) for p in parts)

    if subset == "hbc":
        idx = [i for i, n in enumerate(names) if is_cap(n)]
    elif subset == "imu":
        idx = [i for i, n in enumerate(names) if is_imu(n)]
    else:
        raise DomainError(f"unknown feature subset {subset!r}")
    if not idx:
        raise SchemaError(f"subset {subset!r} selects no features")
    return np.array(idx, dtype=np.intp)


def features_matrix(
    windows: Iterable[Window],
    pipeline: str = "leg",
    subset: str = "all",
) -> tuple[np.ndarray, list[str], np.ndarray, tuple[str, ...]]:
    """Extract features for many windows.

    Returns (X, labels, weights, names) with the chosen column subset
    applied.
    """
    extract = {"leg": extract_features_leg, "gym": extract_features_gym}.get(pipeline)
    if extract is None:
        raise DomainError(f"unknown feature pipeline {pipeline!r}")
    vecs = [extract(w) for w in windows]
    if not vecs:
        raise DomainError("no windows to featurize")
    names = vecs[0].names
    idx = feature_subset_indices(names, subset)
    X = np.stack([v.values for v in vecs])[:, idx]
    labels = [v.label for v in vecs]
    weights = np.array([v.weight for v in vecs])
    sub_names = tuple(names[i] for i in idx)
    return X, labels, weights, sub_names


@dataclass
class FeatureNormalizer:
    """Per-feature affine map to [0, 1] with clipping, frozen on training data.

    Feature j maps x -> clip((x - lo_j) / (hi_j - lo_j), 0, 1) where lo/hi
    are training quantiles.  Constant training features map to 0.5.
    """

    lo: np.ndarray
    hi: np.ndarray
    clip_quantiles: tuple[float, float]

    @classmethod
    def fit(cls, X: np.ndarray, clip_quantiles: tuple[float, float] = (0.01, 0.99)
            ) -> "FeatureNormalizer":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1:
            raise DomainError("normalizer needs a non-empty 2-D matrix")
        if not np.isfinite(X).all():
            raise DomainError("normalizer input contains non-finite values")
        qlo, qhi = clip_quantiles
        if not (0.0 <= qlo < qhi <= 1.0):
            raise DomainError("clip quantiles must satisfy 0 <= low < high <= 1")
        lo = np.quantile(X, qlo, axis=0)
        hi = np.quantile(X, qhi, axis=0)
        return cls(lo=lo, hi=hi, clip_quantiles=(qlo, qhi))

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.lo.shape[0]:
            raise SchemaError(
                f"matrix has {X.shape[1] if X.ndim == 2 else '?'} columns, "
                f"normalizer was fitted on {self.lo.shape[0]}"
            )
        span = self.hi - self.lo
        out = np.empty_like(X)
        const = span <= 0
        nz = ~const
        out[:, nz] = np.clip((X[:, nz] - self.lo[nz]) / span[nz], 0.0, 1.0)
        out[:, const] = 0.5
        return out

    def to_dict(self) -> dict:
        return {
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "clip_quantiles": list(self.clip_quantiles),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureNormalizer":
        return cls(
            lo=np.asarray(d["lo"], dtype=np.float64),
            hi=np.asarray(d["hi"], dtype=np.float64),
            clip_quantiles=tuple(d["clip_quantiles"]),
        )


def normalize_features(X: np.ndarray, normalizer: FeatureNormalizer) -> np.ndarray:
    """Apply a fitted [0, 1] feature map (training-set statistics only)."""
    return normalizer.transform(X)
