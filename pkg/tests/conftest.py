"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from capmotion import Session


def build_session(
    labels,
    fs: float = 20.0,
    label_set_id: str = "LEG7",
    session_id: str = "s0",
    user_id: str = "u0",
    cap=None,
    acc=None,
    gyro=None,
    group_id: str | None = None,
    extras: dict | None = None,
) -> Session:
    """A minimal valid Session around a label array; channels default to zeros."""
    labels = np.asarray(labels, dtype=np.str_)
    n = labels.shape[0]
    return Session(
        id=session_id,
        user_id=user_id,
        session_index=0,
        sensor_position="calf",
        sample_rate_hz=fs,
        label_set_id=label_set_id,
        t=np.arange(n) / fs,
        acc=np.zeros((n, 3)) if acc is None else np.asarray(acc, dtype=np.float64),
        gyro=np.zeros((n, 3)) if gyro is None else np.asarray(gyro, dtype=np.float64),
        cap_uv=np.zeros(n) if cap is None else np.asarray(cap, dtype=np.float64),
        labels=labels,
        group_id=group_id,
        extras=extras or {},
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
