"""Core value types: samples, sessions, windows, label taxonomies.

A recording session is stored column-wise as numpy arrays (one row per
20 Hz sample frame).  All arrays are frozen after construction; derived
objects hold references, never copies, unless stated otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import DataError, SchemaError

__all__ = [
    "DISCARD",
    "SENSOR_POSITIONS",
    "CHANNELS",
    "LabelSet",
    "LEG7",
    "GYM12",
    "COLLAB",
    "COLLAB_SINGLE",
    "COLLAB_PAIR",
    "LABEL_SETS",
    "get_label_set",
    "NOMINAL_PERIOD_S",
    "FAST_GYM_CLASSES",
    "SampleFrame",
    "Session",
    "Window",
    "validate_session",
    "expand_label_intervals",
]

# Sentinel label for frames excluded from window generation (annotation gaps,
# sensor dropouts, transition phases).  Valid in any session regardless of
# label set; never a class of any classifier.
DISCARD = "DISCARD"

SENSOR_POSITIONS = ("wrist", "calf", "pocket")

# Canonical in-memory channel names, in raw-file column order.
CHANNELS = ("acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z", "cap")


@dataclass(frozen=True)
class LabelSet:
    """An ordered activity taxonomy.

    ``null_class`` names the background class if the taxonomy has one.
    Class order is semantic: confusion matrices, per-class metric vectors
    and argmax tie-breaks all follow it.
    """

    id: str
    classes: tuple[str, ...]
    null_class: str | None = None

    def __post_init__(self) -> None:
        if len(set(self.classes)) != len(self.classes):
            raise SchemaError(f"label set {self.id!r} has duplicate classes")
        if self.null_class is not None and self.null_class not in self.classes:
            raise SchemaError(
                f"label set {self.id!r}: null class {self.null_class!r} not a member"
            )
        if DISCARD in self.classes:
            raise SchemaError(f"label set {self.id!r} may not contain {DISCARD!r}")

    def __contains__(self, label: str) -> bool:
        return label in self.classes

    def index(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise SchemaError(f"label {label!r} not in label set {self.id!r}") from None


LEG7 = LabelSet(
    id="LEG7",
    classes=(
        "LegFrontLift",
        "LegSideLift",
        "LegBackLift",
        "StandardSquat",
        "CrossSquat",
        "JumpSquat",
        "SideSquat",
    ),
)

GYM12 = LabelSet(
    id="GYM12",
    classes=(
        "Adductor",
        "ArmCurl",
        "BenchPress",
        "LegCurl",
        "LegPress",
        "Riding",
        "RopeSkipping",
        "Running",
        "Squat",
        "StairsClimber",
        "Walking",
        "Null",
    ),
    null_class="Null",
)

# Raw annotation classes of the collaborative-assembly recordings.
#   A1 start/stop marker, A2 idle, A3 walk alone, A4 carry alone,
#   A5 carry jointly, A6 lift, A7 drop, A8 turn screw,
#   A9 undefined, A10 out of camera coverage.
COLLAB = LabelSet(
    id="COLLAB",
    classes=("A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10"),
)

# Derived classifier taxonomies for the collaboration task (these are model
# target sets; sessions on disk always carry COLLAB labels).
COLLAB_SINGLE = LabelSet(
    id="COLLAB_SINGLE",
    classes=("A3", "A4", "A5", "A6", "A7", "Null"),
    null_class="Null",
)

COLLAB_PAIR = LabelSet(
    id="COLLAB_PAIR",
    classes=("CarryTogether", "LiftTogether", "DropTogether", "Null"),
    null_class="Null",
)

# Sets a session file may declare.
LABEL_SETS: dict[str, LabelSet] = {s.id: s for s in (LEG7, GYM12, COLLAB)}

_ALL_SETS: dict[str, LabelSet] = {
    s.id: s for s in (LEG7, GYM12, COLLAB, COLLAB_SINGLE, COLLAB_PAIR)
}


def get_label_set(label_set_id: str) -> LabelSet:
    try:
        return _ALL_SETS[label_set_id]
    except KeyError:
        raise SchemaError(f"unknown label set {label_set_id!r}") from None


# Nominal repetition cadence per class, seconds per rep.  Drives the default
# simulation scripts and the per-class peak-detection presets.
NOMINAL_PERIOD_S: dict[str, float] = {
    # leg taxonomy
    "LegFrontLift": 2.0,
    "LegSideLift": 2.4,
    "LegBackLift": 2.8,
    "StandardSquat": 2.2,
    "CrossSquat": 2.6,
    "JumpSquat": 1.6,
    "SideSquat": 3.0,
    # gym taxonomy
    "Adductor": 2.5,
    "ArmCurl": 2.0,
    "BenchPress": 2.4,
    "LegCurl": 2.6,
    "LegPress": 2.8,
    "Riding": 0.9,
    "RopeSkipping": 0.6,
    "Running": 0.7,
    "Squat": 3.0,
    "StairsClimber": 1.2,
    "Walking": 1.1,
}

# Gym classes with sub-second cadence; counting smooths these less aggressively.
FAST_GYM_CLASSES = frozenset({"Riding", "RopeSkipping", "Running", "Walking"})


@dataclass(frozen=True)
class SampleFrame:
    """One 20 Hz sample: timestamp, 3-axis acc, 3-axis gyro, body potential.

    ``cap_uv`` is the deviation of the body potential from the charger
    source level, in microvolts.
    """

    t: float
    acc: tuple[float, float, float]
    gyro: tuple[float, float, float]
    cap_uv: float


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Session:
    """A single-user recording with dense per-frame labels.

    ``labels[i]`` annotates frame ``i``; every label is either a class of
    the declared label set or the DISCARD sentinel.  ``group_id`` is only
    set for recordings made in (team) groups and keys the
    leave-one-group-out fold scheme.  ``extras`` is free-form metadata
    carried verbatim through serialization (e.g. simulation ground truth).
    """

    id: str
    user_id: str
    session_index: int
    sensor_position: str
    sample_rate_hz: float
    label_set_id: str
    t: np.ndarray            # (n,) seconds, strictly increasing
    acc: np.ndarray          # (n, 3)
    gyro: np.ndarray         # (n, 3)
    cap_uv: np.ndarray       # (n,) microvolts deviation
    labels: np.ndarray       # (n,) unicode
    acc_unit: str = "g"
    gyro_unit: str = "deg/s"
    group_id: str | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", _freeze(np.asarray(self.t, dtype=np.float64)))
        object.__setattr__(self, "acc", _freeze(np.asarray(self.acc, dtype=np.float64)))
        object.__setattr__(self, "gyro", _freeze(np.asarray(self.gyro, dtype=np.float64)))
        object.__setattr__(self, "cap_uv", _freeze(np.asarray(self.cap_uv, dtype=np.float64)))
        object.__setattr__(self, "labels", _freeze(np.asarray(self.labels, dtype=np.str_)))

    @property
    def n_frames(self) -> int:
        return int(self.t.shape[0])

    def channels(self) -> dict[str, np.ndarray]:
        """Column view keyed by canonical channel name."""
        out = {f"acc_{ax}": self.acc[:, i] for i, ax in enumerate("xyz")}
        out.update({f"gyro_{ax}": self.gyro[:, i] for i, ax in enumerate("xyz")})
        out["cap"] = self.cap_uv
        return out

    def frame(self, i: int) -> SampleFrame:
        return SampleFrame(
            t=float(self.t[i]),
            acc=tuple(float(v) for v in self.acc[i]),
            gyro=tuple(float(v) for v in self.gyro[i]),
            cap_uv=float(self.cap_uv[i]),
        )

    def frames(self) -> Iterator[SampleFrame]:
        for i in range(self.n_frames):
            yield self.frame(i)


@dataclass
class Window:
    """A fixed-length slice of a session with one majority label.

    ``channels`` maps canonical channel names to equally long series;
    ``weight`` is the training weight (1.0 unless class-frequency
    weighting is applied).
    """

    channels: dict[str, np.ndarray]
    label: str
    session_id: str
    start_index: int
    sample_rate_hz: float
    weight: float = 1.0

    @property
    def length(self) -> int:
        return int(next(iter(self.channels.values())).shape[0])


def validate_session(session: Session) -> list[str]:
    """Check the session contract; return human-readable violations.

    An empty list means the session is valid.  Each violation names the
    first offending frame where applicable.
    """
    v: list[str] = []
    n = session.n_frames

    if session.sensor_position not in SENSOR_POSITIONS:
        v.append(
            f"sensor_position {session.sensor_position!r} not one of {SENSOR_POSITIONS}"
        )
    if not (session.sample_rate_hz > 0):
        v.append(f"sample_rate_hz must be positive, got {session.sample_rate_hz}")
    if session.label_set_id not in LABEL_SETS:
        v.append(f"label_set_id {session.label_set_id!r} not registered")

    for name, arr, cols in (
        ("t", session.t, 1),
        ("acc", session.acc, 3),
        ("gyro", session.gyro, 3),
        ("cap_uv", session.cap_uv, 1),
    ):
        want = (n,) if cols == 1 else (n, cols)
        if arr.shape != want:
            v.append(f"{name} has shape {arr.shape}, expected {want}")
    if session.labels.shape != (n,):
        v.append(f"labels has shape {session.labels.shape}, expected {(n,)}")

    for name, arr in (("t", session.t), ("acc", session.acc),
                      ("gyro", session.gyro), ("cap_uv", session.cap_uv)):
        bad = ~np.isfinite(arr)
        if bad.any():
            first = int(np.argwhere(bad)[0][0])
            v.append(f"{name} contains a non-finite value, first at frame {first}")

    if n > 1:
        dt = np.diff(session.t)
        if (dt <= 0).any():
            first = int(np.argmax(dt <= 0))
            v.append(f"t is not strictly increasing, first at frame {first + 1}")

    if session.label_set_id in LABEL_SETS and session.labels.shape == (n,):
        allowed = set(LABEL_SETS[session.label_set_id].classes) | {DISCARD}
        mask = ~np.isin(session.labels, sorted(allowed))
        if mask.any():
            first = int(np.argmax(mask))
            v.append(
                f"label {session.labels[first]!r} at frame {first} not in "
                f"label set {session.label_set_id!r}"
            )
    return v


def expand_label_intervals(
    intervals: Sequence[tuple[float, float, str]] | Sequence[Mapping],
    n_frames: int,
    sample_rate_hz: float,
    default: str = DISCARD,
) -> np.ndarray:
    """Expand interval annotations into a dense per-frame label array.

    Each interval is ``(start_s, end_s, label)`` (or a mapping with those
    keys) covering frames with ``start_s <= t < end_s``.  Later intervals
    overwrite earlier ones; uncovered frames get ``default``.
    """
    if n_frames < 0:
        raise DataError("n_frames must be non-negative")
    if sample_rate_hz <= 0:
        raise DataError("sample_rate_hz must be positive")
    labels = np.full(n_frames, default)  # dtype sized to hold the default
    t = np.arange(n_frames) / sample_rate_hz
    for item in intervals:
        if isinstance(item, Mapping):
            start, end, label = item["start_s"], item["end_s"], item["label"]
        else:
            start, end, label = item
        if end < start:
            raise DataError(f"interval for {label!r} ends before it starts")
        mask = (t >= start) & (t < end)
        # numpy truncates assignments into fixed-width unicode arrays; grow first
        if len(label) > labels.dtype.itemsize // 4:
            labels = labels.astype(f"<U{max(len(label), 16)}")
        labels[mask] = label
    return labels
