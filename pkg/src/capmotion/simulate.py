"""Synthetic session generation through a body-capacitance circuit model.

The wearer's body forms a capacitor against ground.  A charger pin holds
the body near a source potential; when body capacitance changes (foot
lift, squat, contact), the stored charge is conserved at the instant of
change, so the body potential jumps, then relaxes back toward the source
level through the charging path.  The observable is that deviation in
microvolts.

Scripted exercise segments prescribe a capacitance bump per repetition;
the resulting potential trace shows exactly one peak per repetition
before noise injection, which makes these sessions the ground truth for
the counting pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, DomainError
from .rng import substream
from .types import DISCARD, NOMINAL_PERIOD_S, Session, get_label_set

__all__ = [
    "CircuitModel",
    "ScriptSegment",
    "body_potential",
    "simulate_potential_response",
    "generate_session",
    "default_leg7_segments",
    "default_gym_segments",
    "generate_collab_pair",
]

# Per-channel phase offsets so coupled IMU axes are not collinear.
_CHANNEL_PHASE = {
    "acc_x": 0.0,
    "acc_y": 1.1,
    "acc_z": 1.6,
    "gyro_x": 0.7,
    "gyro_y": 2.1,
    "gyro_z": 0.4,
}


@dataclass(frozen=True)
class CircuitModel:
    """Lumped electrical model of the wearer + charger front end.

    ``c1_farads``: coupling between charger electronics and body.
    ``c2_farads``: body-to-ground capacitance (the dominant, motion-driven term).
    ``c3_farads``: parasitic coupling of the charger to ground.
    ``vs_volts`` / ``is_amperes``: source potential and charging current of
    the front end.  ``tau_seconds`` overrides the recovery time constant;
    when None it is derived as C_total * VS / IS.
    ``q_b_coulombs`` sets the initial stored body charge; None starts at
    equilibrium (VS * C_total).
    """

    c1_farads: float = 15e-12
    c2_farads: float = 100e-12
    c3_farads: float = 1e-12
    vs_volts: float = 1.0
    is_amperes: float = 2.32e-10
    tau_seconds: float | None = 0.5
    q_b_coulombs: float | None = None

    def __post_init__(self) -> None:
        for name in ("c1_farads", "c2_farads", "c3_farads"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.c2_farads < 10 * self.c3_farads:
            raise DomainError("c2_farads must dominate c3_farads by at least 10x")
        if not self.vs_volts > 0:
            raise DomainError("vs_volts must be positive")
        if not self.is_amperes > 0:
            raise DomainError("is_amperes must be positive")
        if self.tau_seconds is not None and not self.tau_seconds > 0:
            raise DomainError("tau_seconds must be positive when given")

    @property
    def c_total_farads(self) -> float:
        return self.c1_farads + self.c2_farads + self.c3_farads

    def effective_tau(self) -> float:
        if self.tau_seconds is not None:
            return self.tau_seconds
        return self.c_total_farads * self.vs_volts / self.is_amperes


def body_potential(charge_coulombs: float, capacitance_farads: float) -> float:
    """Potential of a charged body: U = Q / C (volts)."""
    if not capacitance_farads > 0:
        raise DomainError("capacitance must be positive")
    return charge_coulombs / capacitance_farads


def simulate_potential_response(
    cap_trajectory_farads: np.ndarray,
    model: CircuitModel,
    sample_rate_hz: float,
) -> np.ndarray:
    """Body-potential deviation (microvolts) for a capacitance trajectory.

    Per sample: the stored charge is conserved across the capacitance
    change (potential jumps to Q / C_new), then the deviation from the
    source level relaxes by exp(-dt / tau) through the charging path.
    A constant trajectory started at equilibrium yields exactly zero.
    """
    c = np.asarray(cap_trajectory_farads, dtype=np.float64)
    if c.ndim != 1 or c.size == 0:
        raise DomainError("cap trajectory must be a non-empty 1-D series")
    if not np.isfinite(c).all() or (c <= 0).any():
        raise DomainError("cap trajectory must be finite and positive")
    if not sample_rate_hz > 0:
        raise DomainError("sample_rate_hz must be positive")

    vs = model.vs_volts
    decay = math.exp(-1.0 / (sample_rate_hz * model.effective_tau()))
    q = model.q_b_coulombs if model.q_b_coulombs is not None else vs * c[0]

    out = np.empty(c.size, dtype=np.float64)
    for i in range(c.size):
        dev = (q / c[i] - vs) * decay
        q = (vs + dev) * c[i]
        out[i] = dev
    return out * 1e6


@dataclass(frozen=True)
class ScriptSegment:
    """One scripted exercise block: R repetitions at a fixed cadence.

    ``cap_amplitude_uv`` is the desired per-repetition peak of the
    potential deviation; the generator calibrates the capacitance bump
    size to reach it.  ``duty`` is the fraction of each repetition the
    capacitance change occupies: a long hold (leg kept lifted) has a high
    duty, a quick dip a low one.  Duty shapes the waveform independently
    of amplitude, so it survives between-user amplitude scaling.
    ``coupled_channels`` lists the IMU groups ("acc", "gyro") that move
    with the exercise; uncoupled groups receive noise only.
    ``amplitude_drift`` scales each repetition by a random factor in
    [1 - drift, 1 + drift].  ``noise_sigma`` keys: "cap" (uV), "acc"
    (acc units), "gyro" (gyro units), or individual channel names.
    """

    class_label: str
    repetitions: int
    period_s: float
    cap_amplitude_uv: float
    duty: float = 1.0
    imu_amplitude: Mapping[str, float] = field(default_factory=dict)
    coupled_channels: frozenset[str] = frozenset()
    amplitude_drift: float = 0.05
    noise_sigma: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise DomainError("repetitions must be >= 1")
        if not self.period_s > 0:
            raise DomainError("period_s must be positive")
        if self.cap_amplitude_uv < 0:
            raise DomainError("cap_amplitude_uv must be non-negative")
        if not 0 < self.duty <= 1:
            raise DomainError("duty must lie in (0, 1]")
        if not 0 <= self.amplitude_drift < 1:
            raise DomainError("amplitude_drift must lie in [0, 1)")
        bad = set(self.coupled_channels) - {"acc", "gyro"}
        if bad:
            raise DomainError(f"unknown coupled channel groups: {sorted(bad)}")

    def to_dict(self) -> dict:
        return {
            "class": self.class_label,
            "repetitions": self.repetitions,
            "period_s": self.period_s,
            "cap_amplitude_uv": self.cap_amplitude_uv,
            "duty": self.duty,
            "imu_amplitude": dict(self.imu_amplitude),
            "coupled_channels": sorted(self.coupled_channels),
            "amplitude_drift": self.amplitude_drift,
            "noise_sigma": dict(self.noise_sigma),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScriptSegment":
        try:
            return cls(
                class_label=d["class"],
                repetitions=int(d["repetitions"]),
                period_s=float(d["period_s"]),
                cap_amplitude_uv=float(d["cap_amplitude_uv"]),
                duty=float(d.get("duty", 1.0)),
                imu_amplitude=dict(d.get("imu_amplitude", {})),
                coupled_channels=frozenset(d.get("coupled_channels", ())),
                amplitude_drift=float(d.get("amplitude_drift", 0.05)),
                noise_sigma=dict(d.get("noise_sigma", {})),
            )
        except KeyError as e:
            raise DataError(f"script segment missing key {e.args[0]!r}") from None


def _sigma_for(channel: str, noise_sigma: Mapping[str, float]) -> float:
    if channel in noise_sigma:
        return float(noise_sigma[channel])
    group = channel.split("_")[0]
    return float(noise_sigma.get(group, 0.0))


def _bump_shape(n_rep: int, duty: float) -> np.ndarray:
    """One repetition of the capacitance pattern: a raised-sine bump over
    the duty fraction of the period, baseline for the remainder."""
    n_bump = min(n_rep, max(4, int(round(duty * n_rep))))
    shape = np.zeros(n_rep)
    k = np.arange(n_bump)
    shape[:n_bump] = np.sin(np.pi * k / n_bump) ** 2
    return shape


@lru_cache(maxsize=512)
def _bump_response_stats(
    n_rep: int, duty: float, sample_rate_hz: float, model: CircuitModel
) -> tuple[float, float]:
    """(peak, rms) microvolt response per farad of bump height, measured
    on a steady train of identical repetitions (linear regime)."""
    lead = int(round(2 * model.effective_tau() * sample_rate_hz))
    ref = 1e-13
    base = model.c_total_farads
    shape = _bump_shape(n_rep, duty)
    traj = np.concatenate([np.full(lead, base), base + ref * np.tile(shape, 6)])
    resp = simulate_potential_response(traj, model, sample_rate_hz)
    steady = resp[lead + n_rep:]
    peak = float(np.max(np.abs(steady)))
    if peak <= 0:
        raise DomainError("degenerate circuit: bump produced no response")
    rms = float(np.sqrt(np.mean(steady ** 2)))
    return peak / ref, rms / ref


def generate_session(
    segments: Sequence[ScriptSegment],
    *,
    seed: int,
    label_set_id: str = "LEG7",
    model: CircuitModel | None = None,
    sample_rate_hz: float = 20.0,
    rest_gap_s: float = 4.0,
    rest_label: str | None = None,
    session_id: str | None = None,
    user_id: str = "sim-user",
    session_index: int = 0,
    sensor_position: str = "calf",
    group_id: str | None = None,
) -> Session:
    """Render scripted segments into a labelled Session.

    Segments are separated (and book-ended) by rest gaps at baseline
    capacitance.  Rest frames are labelled ``rest_label`` (defaults to the
    label set's null class, or DISCARD when it has none).  Ground-truth
    segment boundaries and repetition counts are stored under
    ``extras["segments"]``.  Identical arguments and seed reproduce the
    session bit for bit.
    """
    if not segments:
        raise DomainError("at least one segment is required")
    model = model or CircuitModel()
    fs = float(sample_rate_hz)
    if fs <= 0:
        raise DomainError("sample_rate_hz must be positive")
    label_set = get_label_set(label_set_id)
    for seg in segments:
        if seg.class_label not in label_set:
            raise DataError(
                f"segment class {seg.class_label!r} not in label set {label_set_id!r}"
            )
        if int(round(seg.period_s * fs)) < 4:
            raise DomainError(
                f"period {seg.period_s}s too short for {fs} Hz sampling"
            )
    if rest_label is None:
        rest_label = label_set.null_class or DISCARD

    rng = substream(seed, "simulate")
    gap_n = int(round(rest_gap_s * fs))
    base = model.c_total_farads

    traj_parts: list[np.ndarray] = [np.full(gap_n, base)]
    label_parts: list[np.ndarray] = [np.full(gap_n, rest_label, dtype="<U32")]
    seg_meta: list[dict] = []
    rep_factors: list[np.ndarray] = []
    cursor = gap_n

    for seg in segments:
        n_rep = int(round(seg.period_s * fs))
        factors = 1.0 + seg.amplitude_drift * rng.uniform(-1.0, 1.0, size=seg.repetitions)
        factors = np.clip(factors, 0.2, None)
        rep_factors.append(factors)
        peak_per_farad, _ = _bump_response_stats(n_rep, seg.duty, fs, model)
        block = np.full(seg.repetitions * n_rep, base)
        bump_shape = _bump_shape(n_rep, seg.duty)
        for r in range(seg.repetitions):
            dc = seg.cap_amplitude_uv * factors[r] / peak_per_farad
            block[r * n_rep:(r + 1) * n_rep] += dc * bump_shape
        traj_parts.append(block)
        label_parts.append(np.full(block.size, seg.class_label, dtype="<U32"))
        seg_meta.append(
            {
                "class": seg.class_label,
                "start_index": cursor,
                "end_index": cursor + block.size,
                "repetitions": seg.repetitions,
                "period_s": seg.period_s,
            }
        )
        cursor += block.size
        traj_parts.append(np.full(gap_n, base))
        label_parts.append(np.full(gap_n, rest_label, dtype="<U32"))
        cursor += gap_n

    traj = np.concatenate(traj_parts)
    labels = np.concatenate(label_parts)
    n = traj.size
    t = np.arange(n) / fs

    cap = simulate_potential_response(traj, model, fs)

    imu = {ch: np.zeros(n) for ch in _CHANNEL_PHASE}
    for seg, meta, factors in zip(segments, seg_meta, rep_factors):
        n_rep = int(round(seg.period_s * fs))
        k = np.arange(n_rep)
        for ch, phase in _CHANNEL_PHASE.items():
            group = ch.split("_")[0]
            if group not in seg.coupled_channels:
                continue
            amp = float(seg.imu_amplitude.get(ch, seg.imu_amplitude.get(group, 0.0)))
            if amp == 0.0:
                continue
            wave = np.sin(2 * np.pi * k / n_rep + phase)
            for r in range(seg.repetitions):
                s = meta["start_index"] + r * n_rep
                imu[ch][s:s + n_rep] += amp * factors[r] * wave

    # Noise draws happen last and are seed-stable regardless of sigma, so a
    # zero-noise twin of the same seed shares the exact clean waveform.
    # Each segment applies its own sigma; rest gaps inherit the sigma of the
    # following segment (trailing gap: the last segment's).
    def sigma_series(ch: str) -> np.ndarray:
        arr = np.empty(n)
        prev_end = 0
        for seg, meta in zip(segments, seg_meta):
            s = _sigma_for(ch, seg.noise_sigma)
            arr[prev_end:meta["end_index"]] = s
            prev_end = meta["end_index"]
        arr[prev_end:] = _sigma_for(ch, segments[-1].noise_sigma)
        return arr

    for ch in _CHANNEL_PHASE:
        imu[ch] = imu[ch] + sigma_series(ch) * rng.standard_normal(n)
    cap = cap + sigma_series("cap") * rng.standard_normal(n)

    acc = np.column_stack([imu["acc_x"], imu["acc_y"], imu["acc_z"]])
    gyro = np.column_stack([imu["gyro_x"], imu["gyro_y"], imu["gyro_z"]])

    return Session(
        id=session_id or f"{user_id}-s{session_index:02d}",
        user_id=user_id,
        session_index=session_index,
        sensor_position=sensor_position,
        sample_rate_hz=fs,
        label_set_id=label_set_id,
        t=t,
        acc=acc,
        gyro=gyro,
        cap_uv=cap,
        labels=labels,
        group_id=group_id,
        extras={"segments": seg_meta, "seed": int(seed)},
    )


def _cap_sigma(
    amp_uv: float,
    snr_db: float,
    period_s: float,
    duty: float,
    sample_rate_hz: float = 20.0,
    model: CircuitModel | None = None,
) -> float:
    """Noise sigma placing the clean capacitive signal at the requested
    SNR (power ratio of clean RMS to noise sigma) for this bump shape."""
    model = model or CircuitModel()
    n_rep = max(int(round(period_s * sample_rate_hz)), 4)
    peak, rms = _bump_response_stats(n_rep, duty, sample_rate_hz, model)
    return amp_uv * (rms / peak) / (10.0 ** (snr_db / 20.0))


# class -> (cap peak uV, duty, coupled groups, acc amp g, gyro amp deg/s).
# Lifts couple no IMU group: seen from a single calf sensor their inertial
# signatures are indistinguishable from stance noise, while the held pose
# gives a long-duty capacitive hump.  Squat variants all shake the sensor
# with similar vigour (amplitudes within typical between-user spread), so
# the capacitive waveform carries the separating shape information.
_LEG7_TABLE: dict[str, tuple[float, float, frozenset[str], float, float]] = {
    "LegFrontLift": (500.0, 0.85, frozenset(), 0.0, 0.0),
    "LegSideLift": (410.0, 0.62, frozenset(), 0.0, 0.0),
    "LegBackLift": (330.0, 0.40, frozenset(), 0.0, 0.0),
    "StandardSquat": (550.0, 0.30, frozenset({"acc", "gyro"}), 0.32, 50.0),
    "CrossSquat": (470.0, 0.48, frozenset({"acc", "gyro"}), 0.30, 46.0),
    "JumpSquat": (610.0, 0.22, frozenset({"acc", "gyro"}), 0.36, 55.0),
    "SideSquat": (440.0, 0.75, frozenset({"acc", "gyro"}), 0.28, 42.0),
}


def default_leg7_segments(
    repetitions: int | Mapping[str, int] = 15,
    *,
    snr_db: float = 20.0,
    user_scale: float = 1.0,
    period_scale: float = 1.0,
    amplitude_drift: float = 0.06,
) -> list[ScriptSegment]:
    """Scripted leg-exercise set: three lifts (no IMU coupling), four squats.

    ``user_scale`` and ``period_scale`` model between-user amplitude and
    tempo differences.  ``snr_db`` sets capacitive noise relative to each
    segment's clean signal level; IMU noise floors stay fixed so uncoupled
    segments are pure noise there.
    """
    segs = []
    for cls, (amp, duty, coupled, a_amp, g_amp) in _LEG7_TABLE.items():
        reps = repetitions[cls] if isinstance(repetitions, Mapping) else int(repetitions)
        amp_u = amp * user_scale
        period = NOMINAL_PERIOD_S[cls] * period_scale
        segs.append(
            ScriptSegment(
                class_label=cls,
                repetitions=reps,
                period_s=period,
                cap_amplitude_uv=amp_u,
                duty=duty,
                imu_amplitude={"acc": a_amp * user_scale, "gyro": g_amp * user_scale},
                coupled_channels=coupled,
                amplitude_drift=amplitude_drift,
                noise_sigma={
                    "cap": _cap_sigma(amp_u, snr_db, period, duty),
                    "acc": 0.03,
                    "gyro": 2.5,
                },
            )
        )
    return segs


# class -> (cap peak uV, acc amp g, gyro amp deg/s); all gym classes couple
# both IMU groups (whole-body exercises seen from the wearing position).
_GYM_TABLE: dict[str, tuple[float, float, float]] = {
    "Adductor": (350.0, 0.10, 12.0),
    "ArmCurl": (420.0, 0.45, 55.0),
    "BenchPress": (480.0, 0.40, 30.0),
    "LegCurl": (390.0, 0.12, 15.0),
    "LegPress": (430.0, 0.15, 14.0),
    "Riding": (300.0, 0.25, 40.0),
    "RopeSkipping": (620.0, 1.10, 120.0),
    "Running": (560.0, 0.90, 110.0),
    "Squat": (520.0, 0.38, 48.0),
    "StairsClimber": (400.0, 0.50, 70.0),
    "Walking": (380.0, 0.35, 60.0),
}


def default_gym_segments(
    repetitions: int | Mapping[str, int] = 12,
    *,
    snr_db: float = 20.0,
    user_scale: float = 1.0,
    period_scale: float = 1.0,
    amplitude_drift: float = 0.08,
) -> list[ScriptSegment]:
    """Scripted gym-workout set covering the eleven exercise classes."""
    segs = []
    for cls, (amp, a_amp, g_amp) in _GYM_TABLE.items():
        reps = repetitions[cls] if isinstance(repetitions, Mapping) else int(repetitions)
        amp_u = amp * user_scale
        period = NOMINAL_PERIOD_S[cls] * period_scale
        segs.append(
            ScriptSegment(
                class_label=cls,
                repetitions=reps,
                period_s=period,
                cap_amplitude_uv=amp_u,
                imu_amplitude={"acc": a_amp * user_scale, "gyro": g_amp * user_scale},
                coupled_channels=frozenset({"acc", "gyro"}),
                amplitude_drift=amplitude_drift,
                noise_sigma={
                    "cap": _cap_sigma(amp_u, snr_db, period, 1.0),
                    "acc": 0.04,
                    "gyro": 3.0,
                },
            )
        )
    return segs


def generate_collab_pair(
    *,
    seed: int,
    group_id: str,
    user_a: str,
    user_b: str,
    session_index: int = 0,
    sample_rate_hz: float = 20.0,
    n_blocks: int = 6,
) -> tuple[Session, Session]:
    """Two aligned single-user recordings of a scripted assembly scenario.

    Each block runs: idle, walk, solo carry, joint carry (both A5), a
    lift/drop pair whose A6/A7 intervals only partially overlap between
    the workers, and screw turning.  During genuinely joint phases both
    users share a common capacitive component (bodies connected), which is
    what the pairwise features pick up.  Gyro stays disabled (noise only).
    """
    fs = float(sample_rate_hz)
    rng = substream(seed, "collab")

    phases_a: list[tuple[float, str]] = []
    phases_b: list[tuple[float, str]] = []

    def block() -> None:
        d_idle = rng.uniform(4, 7)
        d_walk = rng.uniform(5, 8)
        d_carry = rng.uniform(5, 8)
        d_joint = rng.uniform(6, 9)
        d_lift = rng.uniform(2.5, 4)
        lag = rng.uniform(0.3, min(1.2, d_lift / 2))
        d_screw = rng.uniform(4, 6)
        for phases, me_first in ((phases_a, True), (phases_b, False)):
            phases.append((d_idle, "A2"))
            phases.append((d_walk, "A3"))
            phases.append((d_carry, "A4"))
            phases.append((d_joint, "A5"))
            # staggered joint lift then drop: partial A6/A7 overlap
            if me_first:
                phases.append((d_lift, "A6"))
                phases.append((lag, "A2"))
                phases.append((d_lift, "A7"))
            else:
                phases.append((lag, "A2"))
                phases.append((d_lift, "A6"))
                phases.append((d_lift - lag, "A7"))
                phases.append((lag, "A2"))
            phases.append((d_screw, "A8"))

    for _ in range(n_blocks):
        block()

    def render(phases: list[tuple[float, str]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = int(round(sum(d for d, _ in phases) * fs))
        labels = np.full(n, "A2", dtype="<U8")
        acc = np.zeros((n, 3))
        cap = np.zeros(n)
        pos = 0
        for dur, cls in phases:
            # per-phase rounding can overshoot the rounded total by a frame
            m = min(int(round(dur * fs)), n - pos)
            if m <= 0:
                continue
            sl = slice(pos, pos + m)
            labels[pos:pos + m] = cls
            k = np.arange(m)
            amp_acc, amp_cap, per = {
                "A2": (0.02, 15.0, 1.0),
                "A3": (0.40, 120.0, 1.1),
                "A4": (0.35, 260.0, 1.2),
                "A5": (0.30, 340.0, 1.3),
                "A6": (0.55, 430.0, max(dur, 0.5)),
                "A7": (0.50, 390.0, max(dur, 0.5)),
                "A8": (0.15, 60.0, 0.8),
            }[cls]
            w = 2 * np.pi * k / max(per * fs, 4)
            for ax, ph in enumerate((0.0, 1.2, 2.1)):
                acc[sl, ax] += amp_acc * np.sin(w + ph)
            cap[sl] += amp_cap * np.sin(w / 2) ** 2
            pos += m
        return labels, acc, cap

    la, acc_a, cap_a = render(phases_a)
    lb, acc_b, cap_b = render(phases_b)
    n = min(la.size, lb.size)
    la, acc_a, cap_a = la[:n], acc_a[:n], cap_a[:n]
    lb, acc_b, cap_b = lb[:n], acc_b[:n], cap_b[:n]

    # Bodies in contact: joint phases inject a shared capacitive component.
    both_joint = ((la == lb) & np.isin(la, ["A5", "A6", "A7"]))
    shared = 180.0 * np.sin(2 * np.pi * np.arange(n) / (1.3 * fs)) ** 2
    cap_a = cap_a + np.where(both_joint, shared, 0.0)
    cap_b = cap_b + np.where(both_joint, shared, 0.0)

    cap_a += 35.0 * rng.standard_normal(n)
    cap_b += 35.0 * rng.standard_normal(n)
    acc_a += 0.03 * rng.standard_normal((n, 3))
    acc_b += 0.03 * rng.standard_normal((n, 3))
    gyro_a = 0.8 * rng.standard_normal((n, 3))
    gyro_b = 0.8 * rng.standard_normal((n, 3))
    t = np.arange(n) / fs

    def mk(uid: str, labels: np.ndarray, acc: np.ndarray, gyro: np.ndarray, cap: np.ndarray) -> Session:
        return Session(
            id=f"{group_id}-{uid}-s{session_index:02d}",
            user_id=uid,
            session_index=session_index,
            sensor_position="wrist",
            sample_rate_hz=fs,
            label_set_id="COLLAB",
            t=t,
            acc=acc,
            gyro=gyro,
            cap_uv=cap,
            labels=labels,
            group_id=group_id,
            extras={"seed": int(seed)},
        )

    return mk(user_a, la, acc_a, gyro_a, cap_a), mk(user_b, lb, acc_b, gyro_b, cap_b)
