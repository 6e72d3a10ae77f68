"""Two-user collaboration: timeline alignment, joint labels, pair features.

Two wearers recorded separately are aligned frame-by-frame by nearest
timestamp.  Joint activity labels are then derived per aligned frame:
both users doing the same cooperative action (carry / lift / drop) makes
the cooperative class, transitional or out-of-scope actions discard the
frame, anything else is Null.  The same per-user annotations can instead
be remapped to a single-user label set for per-wearer baselines.

Pair feature vectors are built order-invariantly: the two per-user
vectors are keyed and sorted, then concatenated together with their
element-wise mean and absolute difference, so swapping argument order
changes nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import AlignmentError, DomainError, SchemaError
from .features import FeatureVector
from .types import DISCARD, Session

__all__ = [
    "PairTimeline",
    "ClassMapping",
    "SINGLE_USER_MAPPING",
    "align_sessions",
    "derive_pair_labels",
    "remap_labels",
    "pair_features",
]

# Cooperative classes: identical simultaneous annotation becomes the joint class.
_JOINT_BY_CLASS = {
    "A5": "CarryTogether",
    "A6": "LiftTogether",
    "A7": "DropTogether",
}
# Transitional / out-of-scope annotations poison the frame for pair analysis.
_PAIR_DISCARD_CLASSES = frozenset({"A1", "A9", "A10"})
# Soft cooperative classes, collapsible to Null when only sustained
# cooperation (carrying) should count as positive.
_SOFT_JOINT = frozenset({"LiftTogether", "DropTogether"})


@dataclass(frozen=True)
class PairTimeline:
    """Frame alignment of session ``b`` onto session ``a``'s timeline.

    ``b_index_for_a[i]`` is the matched frame of ``b`` for frame ``i`` of
    ``a``, or -1 where no ``b`` frame lies within the tolerance.
    """

    session_a_id: str
    session_b_id: str
    b_index_for_a: np.ndarray
    tolerance_s: float

    @property
    def n_frames(self) -> int:
        return int(self.b_index_for_a.shape[0])

    @property
    def matched_fraction(self) -> float:
        return float(np.mean(self.b_index_for_a >= 0))


def align_sessions(a: Session, b: Session,
                   tolerance_s: float | None = None) -> PairTimeline:
    """Match every frame of ``a`` to the nearest-in-time frame of ``b``.

    Default tolerance is one sample period of ``a``.  Equidistant
    candidates resolve to the earlier ``b`` frame.  If nothing matches,
    the recordings do not overlap and alignment fails loudly.
    """
    if tolerance_s is None:
        tolerance_s = 1.0 / a.sample_rate_hz
    if tolerance_s <= 0:
        raise DomainError("tolerance_s must be positive")
    at = np.asarray(a.t, dtype=np.float64)
    bt = np.asarray(b.t, dtype=np.float64)
    pos = np.searchsorted(bt, at)
    out = np.full(at.shape[0], -1, dtype=np.intp)
    for i, p in enumerate(pos):
        lo = p - 1
        best = -1
        best_d = np.inf
        # earlier candidate first so exact ties keep it
        for cand in (lo, p):
            if 0 <= cand < bt.shape[0]:
                d = abs(at[i] - bt[cand])
                if d < best_d:
                    best_d = d
                    best = cand
        if best >= 0 and best_d <= tolerance_s:
            out[i] = best
    if not (out >= 0).any():
        raise AlignmentError(
            f"sessions {a.id!r} and {b.id!r} share no overlapping timestamps "
            f"within {tolerance_s} s"
        )
    return PairTimeline(session_a_id=a.id, session_b_id=b.id,
                        b_index_for_a=out, tolerance_s=tolerance_s)


def derive_pair_labels(timeline: PairTimeline,
                       a_labels: Sequence[str],
                       b_labels: Sequence[str],
                       hard_lift_drop: bool = True) -> np.ndarray:
    """Joint label per frame of the ``a`` timeline.

    Rules, in order: unmatched or explicitly discarded frames, or a
    transitional/out-of-scope annotation on either side, discard the
    frame; identical cooperative annotations on both sides yield the
    cooperative class; everything else is Null.  With
    ``hard_lift_drop=False`` the brief lift/drop cooperative classes
    collapse to Null, keeping only sustained carrying positive.
    """
    a_labels = list(a_labels)
    b_labels = list(b_labels)
    if len(a_labels) != timeline.n_frames:
        raise DomainError("a_labels length does not match the timeline")
    out = np.empty(timeline.n_frames, dtype=object)
    for i in range(timeline.n_frames):
        j = int(timeline.b_index_for_a[i])
        if j < 0:
            out[i] = DISCARD
            continue
        la = a_labels[i]
        lb = b_labels[j]
        if la == DISCARD or lb == DISCARD:
            out[i] = DISCARD
        elif la in _PAIR_DISCARD_CLASSES or lb in _PAIR_DISCARD_CLASSES:
            out[i] = DISCARD
        elif la == lb and la in _JOINT_BY_CLASS:
            joint = _JOINT_BY_CLASS[la]
            if not hard_lift_drop and joint in _SOFT_JOINT:
                out[i] = "Null"
            else:
                out[i] = joint
        else:
            out[i] = "Null"
    return np.asarray(out.tolist(), dtype=str)


@dataclass(frozen=True)
class ClassMapping:
    """Total relabeling table from one label vocabulary to another.

    Every source label must appear as a key; the discard sentinel always
    passes through unchanged.
    """

    name: str
    table: Mapping[str, str]


SINGLE_USER_MAPPING = ClassMapping(
    name="collab_single_user",
    table={
        "A1": DISCARD,
        "A2": "Null",
        "A3": "A3",
        "A4": "A4",
        "A5": "A5",
        "A6": "A6",
        "A7": "A7",
        "A8": "Null",
        "A9": DISCARD,
        "A10": DISCARD,
    },
)


def remap_labels(labels: Sequence[str], mapping: ClassMapping) -> np.ndarray:
    """Apply a total relabeling; an unmapped label is a schema error."""
    out = []
    for lab in labels:
        if lab == DISCARD:
            out.append(DISCARD)
            continue
        if lab not in mapping.table:
            raise SchemaError(
                f"label {lab!r} has no entry in mapping {mapping.name!r}"
            )
        out.append(mapping.table[lab])
    return np.asarray(out, dtype=str)


def pair_features(key_a: str, vec_a: FeatureVector,
                  key_b: str, vec_b: FeatureVector,
                  label: str | None = None,
                  weight: float = 1.0) -> FeatureVector:
    """Symmetric combination of two per-user feature vectors.

    The users are ordered by their keys, so calling with the arguments
    swapped returns the identical vector.  Layout: first user's values
    (prefix "a_"), second user's ("b_"), element-wise mean ("mean_"),
    element-wise absolute difference ("absdiff_").
    """
    if key_a == key_b:
        raise DomainError("pair_features needs two distinct user keys")
    if vec_a.names != vec_b.names:
        raise SchemaError(
            "pair_features requires identical feature compositions for both users"
        )
    if key_b < key_a:
        key_a, key_b = key_b, key_a
        vec_a, vec_b = vec_b, vec_a
    va = np.asarray(vec_a.values, dtype=np.float64)
    vb = np.asarray(vec_b.values, dtype=np.float64)
    names = (
        tuple(f"a_{n}" for n in vec_a.names)
        + tuple(f"b_{n}" for n in vec_b.names)
        + tuple(f"mean_{n}" for n in vec_a.names)
        + tuple(f"absdiff_{n}" for n in vec_a.names)
    )
    values = np.concatenate([va, vb, (va + vb) / 2.0, np.abs(va - vb)])
    return FeatureVector(names=names, values=values,
                         label=label if label is not None else vec_a.label,
                         weight=weight)
