"""Session file IO and signal preprocessing.

On-disk format: a UTF-8 CSV with the fixed column order

    t,acc_x,acc_y,acc_z,gyro_x,gyro_y,gyro_z,cap_uV,label

plus a JSON sidecar (same path, ``.json`` instead of ``.csv``) carrying
the session metadata.  Floats are written in shortest round-trip form, so
loading and re-saving a canonical file reproduces it byte for byte.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DataError, DomainError, ParseError
from .types import Session, validate_session

__all__ = [
    "CSV_COLUMNS",
    "PreprocessConfig",
    "load_session",
    "save_session",
    "detrend",
    "normalize_session_hbc",
    "atomic_write_text",
]

CSV_COLUMNS = ("t", "acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z", "cap_uV", "label")

DETREND_MODES = ("none", "mean", "linear")


@dataclass(frozen=True)
class PreprocessConfig:
    """Knobs for the per-session preprocessing stage.

    ``hbc_anchor_class`` selects the exercise whose frames pin the
    normalization range; None disables capacitive-channel normalization.
    ``clip_quantiles`` are the training-set quantiles used later for
    feature scaling (carried here so one config describes the stage).
    """

    detrend_mode: str = "none"
    hbc_anchor_class: str | None = None
    hbc_range_uv: tuple[float, float] = (-500.0, 500.0)
    clip_quantiles: tuple[float, float] = (0.01, 0.99)

    def __post_init__(self) -> None:
        if self.detrend_mode not in DETREND_MODES:
            raise DomainError(f"detrend_mode must be one of {DETREND_MODES}")
        lo, hi = self.hbc_range_uv
        if not hi > lo:
            raise DomainError("hbc_range_uv must satisfy high > low")
        qlo, qhi = self.clip_quantiles
        if not (0.0 <= qlo < qhi <= 1.0):
            raise DomainError("clip_quantiles must satisfy 0 <= low < high <= 1")


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file + rename so readers never see partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".json")


def _fmt(v: float) -> str:
    return repr(float(v))


def save_session(session: Session, csv_path: str | Path) -> None:
    """Write the CSV + sidecar pair (atomically, canonical formatting)."""
    violations = validate_session(session)
    if violations:
        raise DataError("refusing to save invalid session: " + "; ".join(violations))
    csv_path = Path(csv_path)

    lines = [",".join(CSV_COLUMNS)]
    for i in range(session.n_frames):
        row = [
            _fmt(session.t[i]),
            _fmt(session.acc[i, 0]), _fmt(session.acc[i, 1]), _fmt(session.acc[i, 2]),
            _fmt(session.gyro[i, 0]), _fmt(session.gyro[i, 1]), _fmt(session.gyro[i, 2]),
            _fmt(session.cap_uv[i]),
            str(session.labels[i]),
        ]
        lines.append(",".join(row))
    atomic_write_text(csv_path, "\n".join(lines) + "\n")

    meta = {
        "format_version": 1,
        "id": session.id,
        "user_id": session.user_id,
        "session_index": session.session_index,
        "sensor_position": session.sensor_position,
        "sample_rate_hz": session.sample_rate_hz,
        "label_set_id": session.label_set_id,
        "acc_unit": session.acc_unit,
        "gyro_unit": session.gyro_unit,
        "group_id": session.group_id,
        "extras": session.extras,
    }
    atomic_write_text(_sidecar_path(csv_path), json.dumps(meta, sort_keys=True, indent=2) + "\n")


def load_session(csv_path: str | Path) -> Session:
    """Read a CSV + sidecar pair; raises with a line number on bad rows."""
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise DataError(f"session file not found: {csv_path}")
    side = _sidecar_path(csv_path)
    if not side.exists():
        raise DataError(f"missing sidecar metadata file: {side}")
    try:
        meta = json.loads(side.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"sidecar {side} is not valid JSON: {e}") from None

    for key in ("id", "user_id", "session_index", "sensor_position",
                "sample_rate_hz", "label_set_id"):
        if key not in meta:
            raise DataError(f"sidecar {side} missing required key {key!r}")

    rows: list[list[str]] = []
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty session file", line=1) from None
        if tuple(header) != CSV_COLUMNS:
            raise ParseError(
                f"bad header {header!r}, expected {','.join(CSV_COLUMNS)}", line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_COLUMNS):
                raise ParseError(
                    f"expected {len(CSV_COLUMNS)} columns, got {len(row)}", line=lineno
                )
            rows.append(row)

    n = len(rows)
    t = np.empty(n)
    acc = np.empty((n, 3))
    gyro = np.empty((n, 3))
    cap = np.empty(n)
    labels = []
    for i, row in enumerate(rows):
        try:
            t[i] = float(row[0])
            acc[i] = [float(row[1]), float(row[2]), float(row[3])]
            gyro[i] = [float(row[4]), float(row[5]), float(row[6])]
            cap[i] = float(row[7])
        except ValueError:
            raise ParseError(f"non-numeric value in row: {row!r}", line=i + 2) from None
        labels.append(row[8])

    session = Session(
        id=str(meta["id"]),
        user_id=str(meta["user_id"]),
        session_index=int(meta["session_index"]),
        sensor_position=str(meta["sensor_position"]),
        sample_rate_hz=float(meta["sample_rate_hz"]),
        label_set_id=str(meta["label_set_id"]),
        t=t,
        acc=acc,
        gyro=gyro,
        cap_uv=cap,
        labels=np.array(labels, dtype=np.str_) if labels else np.empty(0, dtype=np.str_),
        acc_unit=str(meta.get("acc_unit", "g")),
        gyro_unit=str(meta.get("gyro_unit", "deg/s")),
        group_id=meta.get("group_id"),
        extras=meta.get("extras", {}),
    )
    violations = validate_session(session)
    if violations:
        raise DataError(f"invalid session {csv_path}: " + "; ".join(violations))
    return session


def detrend(series: np.ndarray, mode: str = "linear") -> np.ndarray:
    """Remove a constant or straight-line trend from a series.

    Idempotent up to float error: re-detrending an already detrended
    series changes nothing.
    """
    if mode not in DETREND_MODES:
        raise DomainError(f"detrend mode must be one of {DETREND_MODES}")
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise DomainError("detrend expects a 1-D series")
    if mode == "none" or x.size == 0:
        return x.copy()
    if mode == "mean":
        return x - x.mean()
    if x.size == 1:
        return np.zeros_like(x)
    idx = np.arange(x.size, dtype=np.float64)
    slope, intercept = np.polyfit(idx, x, 1)
    return x - (slope * idx + intercept)


def normalize_session_hbc(session: Session, config: PreprocessConfig) -> Session:
    """Affinely rescale the capacitive channel so the anchor class spans
    the configured range.

    The map is fitted on frames labelled ``hbc_anchor_class`` and applied
    to the whole session, preserving between-class amplitude ratios.
    Applying the same normalization twice is an identity (up to float
    rounding).
    """
    anchor = config.hbc_anchor_class
    if anchor is None:
        raise DomainError("hbc_anchor_class is not set")
    mask = session.labels == anchor
    if not mask.any():
        raise DomainError(f"session {session.id} has no frames of anchor class {anchor!r}")
    lo_uv, hi_uv = config.hbc_range_uv
    amin = float(session.cap_uv[mask].min())
    amax = float(session.cap_uv[mask].max())
    if amax - amin <= 0:
        raise DomainError(
            f"anchor class {anchor!r} is constant in session {session.id}; cannot scale"
        )
    scale = (hi_uv - lo_uv) / (amax - amin)
    new_cap = (session.cap_uv - amin) * scale + lo_uv
    return replace(session, cap_uv=new_cap)
