"""Joint-angle trajectories: ingestion, filtering, differentiation, screening
and time warping.

Angles are stored in degrees and velocities in deg/s throughout; conversion
to radians happens only inside the dynamics code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.signal import butter, filtfilt

from .chain import JOINT_NAMES, REPORTING_JOINTS
from .errors import DomainError, ParseError

UNIFORM_DT_TOL = 1e-9


def _validate_series(time, values, joints, kind):
    time = np.array(time, dtype=float)
    values = np.array(values, dtype=float)
    if values.ndim != 2 or time.ndim != 1 or values.shape[0] != time.shape[0]:
        raise DomainError(f"{kind}: time and values must be (frames,) and (frames, joints)")
    if values.shape[1] != len(joints):
        raise DomainError(f"{kind}: {values.shape[1]} columns but {len(joints)} joint names")
    if len(set(joints)) != len(joints):
        raise DomainError(f"{kind}: duplicate joint names")
    if not np.all(np.isfinite(time)) or not np.all(np.isfinite(values)):
        bad = np.where(~np.isfinite(values).all(axis=1) | ~np.isfinite(time))[0][0]
        raise ParseError(f"{kind} has non-finite samples", row=int(bad))
    if time.size > 1:
        steps = np.diff(time)
        dt = (time[-1] - time[0]) / (time.size - 1)
        if dt <= 0:
            raise ParseError(f"{kind}: time must be strictly increasing")
        off = np.abs(steps - dt) > UNIFORM_DT_TOL
        if off.any():
            raise ParseError(f"{kind}: non-uniform time step", row=int(np.argmax(off)) + 1)
    time.setflags(write=False)
    values.setflags(write=False)
    return time, values


@dataclass(frozen=True, eq=False)
class JointTrajectory:
    """Uniformly sampled joint angles (degrees), one column per joint."""

    time: np.ndarray
    angles: np.ndarray
    joints: tuple = JOINT_NAMES
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        joints = tuple(self.joints)
        time, angles = _validate_series(self.time, self.angles, joints, "trajectory")
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def n_frames(self) -> int:
        return self.time.size

    @property
    def dt(self) -> float:
        if self.n_frames < 2:
            raise DomainError("a single frame has no time step")
        return float((self.time[-1] - self.time[0]) / (self.n_frames - 1))

    @property
    def duration(self) -> float:
        return float(self.time[-1] - self.time[0])

    @property
    def rate(self) -> float:
        return 1.0 / self.dt

    def column(self, joint: str) -> np.ndarray:
        return self.angles[:, self.joints.index(joint)]

    def select(self, joints: Sequence[str]) -> np.ndarray:
        """Angle columns in the order of ``joints``."""
        missing = [j for j in joints if j not in self.joints]
        if missing:
            raise DomainError(f"trajectory lacks joints {missing}")
        return self.angles[:, [self.joints.index(j) for j in joints]]

    def with_angles(self, angles, time=None) -> "JointTrajectory":
        return replace(self, angles=np.asarray(angles, dtype=float),
                       time=self.time if time is None else np.asarray(time, dtype=float))

    @property
    def label(self) -> str:
        md = self.metadata
        return f"{md.get('task', '?')}/{md.get('subject', '?')}/{md.get('repetition', '?')}"


@dataclass(frozen=True, eq=False)
class VelocityTrajectory:
    """Joint velocities (deg/s) sampled on the source trajectory's grid."""

    time: np.ndarray
    values: np.ndarray
    joints: tuple = JOINT_NAMES
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        joints = tuple(self.joints)
        time, values = _validate_series(self.time, self.values, joints, "velocity")
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "metadata", dict(self.metadata))

    def column(self, joint: str) -> np.ndarray:
        return self.values[:, self.joints.index(joint)]

    def select(self, joints: Sequence[str]) -> np.ndarray:
        return self.values[:, [self.joints.index(j) for j in joints]]


# --------------------------------------------------------------------------
# CSV I/O

def load_trajectory(source, required: Sequence[str] = JOINT_NAMES) -> JointTrajectory:
    """Read a trajectory CSV.

    The header is ``time,<joint>,...``; ``# key=value`` comment lines carry
    metadata (task, subject, repetition). Row numbers in errors are frame
    indices counted from 0.
    """
    path = Path(source)
    metadata: dict = {}
    header = None
    rows = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep:
                    metadata[key.strip()] = value.strip()
                continue
            if header is None:
                header = [h.strip() for h in line.split(",")]
                continue
            fields = line.split(",")
            if len(fields) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(fields)}",
                                 row=len(rows))
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise ParseError(str(exc), row=len(rows)) from None
    if header is None or header[0] != "time":
        raise ParseError(f"{path}: header must start with 'time'")
    joints = tuple(header[1:])
    missing = [j for j in required if j not in joints]
    if missing:
        raise ParseError(f"{path}: missing required joints {missing}")
    if not rows:
        raise ParseError(f"{path}: no samples")
    data = np.array(rows, dtype=float)
    bad = np.where(~np.isfinite(data).all(axis=1))[0]
    if bad.size:
        raise ParseError(f"{path}: non-finite value", row=int(bad[0]))
    return JointTrajectory(data[:, 0], data[:, 1:], joints, metadata)


def trajectory_text(traj: JointTrajectory) -> str:
    """CSV text with ``# key=value`` metadata lines, as read by :func:`load_trajectory`."""
    lines = [f"# {k}={v}" for k, v in sorted(traj.metadata.items())]
    lines.append(",".join(("time",) + traj.joints))
    for t, row in zip(traj.time, traj.angles):
        lines.append(",".join([f"{t:.10g}"] + [f"{v:.12g}" for v in row]))
    return "\n".join(lines) + "\n"


def save_trajectory(traj: JointTrajectory, target) -> None:
    Path(target).write_text(trajectory_text(traj), encoding="utf-8")


# --------------------------------------------------------------------------
# Filtering and differentiation

def lowpass_filter(traj: JointTrajectory, order: int = 3, cutoff: float = 6.0) -> JointTrajectory:
    """Zero-phase Butterworth low-pass (forward-backward pass).

    The straight line joining the first and last sample of each column is
    removed before filtering and restored afterwards, so constant and linear
    signals pass through exactly; the residual is padded by odd reflection
    of ``3 * order`` samples at each end.
    """
    nyquist = traj.rate / 2
    if not 0 < cutoff < nyquist:
        raise DomainError(f"cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz")
    b, a = butter(order, cutoff / nyquist)
    x = traj.angles
    n = x.shape[0]
    padlen = 3 * order
    if n <= padlen:
        raise DomainError(f"need more than {padlen} frames to filter, got {n}")
    ramp = np.linspace(0.0, 1.0, n)[:, None]
    trend = x[0] + ramp * (x[-1] - x[0])
    filtered = filtfilt(b, a, x - trend, axis=0, padtype="odd", padlen=padlen) + trend
    return traj.with_angles(filtered)


def gradient(values: np.ndarray, dt: float) -> np.ndarray:
    """Second-order finite differences along axis 0 (central inside, one-sided at ends)."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 3:
        raise DomainError("differentiation needs at least 3 frames")
    return np.gradient(values, dt, axis=0, edge_order=2)


def differentiate(traj: JointTrajectory) -> VelocityTrajectory:
    return VelocityTrajectory(traj.time, gradient(traj.angles, traj.dt), traj.joints,
                              traj.metadata)


# --------------------------------------------------------------------------
# Screening

@dataclass
class Partition:
    """Indices of kept and excluded items plus the rule that fired for each exclusion."""

    kept: list
    excluded: list
    reasons: dict = field(default_factory=dict)


def tukey_fence(values) -> float:
    q1, q3 = np.percentile(np.asarray(values, dtype=float), [25, 75])
    return q3 + 1.5 * (q3 - q1)


def direction_peaks(values: np.ndarray) -> np.ndarray:
    """Per-column peak speed in the positive and negative direction, shape (2, joints)."""
    return np.vstack([np.maximum(values.max(axis=0), 0.0),
                      np.maximum(-values.min(axis=0), 0.0)])


def screen_velocity_outliers(trials: Sequence[VelocityTrajectory],
                             joints: Sequence[str] | None = None) -> Partition:
    """Exclude trials whose peak speed in any joint direction exceeds the
    Tukey fence ``Q3 + 1.5 IQR`` of the peer peaks."""
    if len(trials) == 0:
        raise DomainError("cannot screen an empty group")
    if joints is None:
        joints = [j for j in trials[0].joints if all(j in t.joints for t in trials)]
    peaks = np.array([direction_peaks(t.select(joints)) for t in trials])  # trial, dir, joint
    kept, excluded, reasons = [], [], {}
    fences = np.empty(peaks.shape[1:])
    for d in range(2):
        for j in range(len(joints)):
            fences[d, j] = tukey_fence(peaks[:, d, j])
    for i in range(len(trials)):
        over = np.argwhere(peaks[i] > fences)
        if over.size:
            d, j = over[0]
            excluded.append(i)
            reasons[i] = (f"velocity-iqr: {joints[j]} {'+-'[d]} peak "
                          f"{peaks[i, d, j]:.6g} > fence {fences[d, j]:.6g}")
        else:
            kept.append(i)
    return Partition(kept, excluded, reasons)


# --------------------------------------------------------------------------
# Velocity caps and time warping

@dataclass(frozen=True)
class VelocityCaps:
    """Per-joint ``(negative, positive)`` velocity limits in deg/s."""

    limits: Mapping = field(default_factory=lambda: {"WF": (-300.0, 300.0),
                                                     "WD": (-102.0, 102.0)})

    def __post_init__(self):
        limits = {}
        for joint, (neg, pos) in dict(self.limits).items():
            if not (pos > 0 > neg):
                raise DomainError(f"caps for {joint} must satisfy positive > 0 > negative, "
                                  f"got ({neg}, {pos})")
            limits[joint] = (float(neg), float(pos))
        object.__setattr__(self, "limits", limits)

    def __contains__(self, joint):
        return joint in self.limits

    def __getitem__(self, joint):
        return self.limits[joint]

    @classmethod
    def from_percentile(cls, velocities: Iterable[VelocityTrajectory], p: float = 99.0,
                        joints: Sequence[str] = REPORTING_JOINTS,
                        overrides: Mapping | None = None) -> "VelocityCaps":
        """Caps at the ``p``-th (positive) and ``100-p``-th (negative)
        percentile of velocities pooled across trials."""
        velocities = list(velocities)
        limits = {}
        for joint in joints:
            pooled = np.concatenate([v.column(joint) for v in velocities if joint in v.joints])
            if pooled.size == 0:
                continue
            pos = float(np.percentile(pooled, p))
            neg = float(np.percentile(pooled, 100 - p))
            if pos <= 0 and neg >= 0:
                continue
            if pos <= 0:
                pos = -neg
            if neg >= 0:
                neg = -pos
            limits[joint] = (neg, pos)
        limits.update(overrides or {})
        return cls(limits)

    def ratios(self, joints: Sequence[str], velocities: np.ndarray) -> np.ndarray:
        """``|v| / cap`` per sample and capped joint (uncapped joints give 0)."""
        out = np.zeros_like(velocities, dtype=float)
        for k, joint in enumerate(joints):
            if joint in self.limits:
                neg, pos = self.limits[joint]
                v = velocities[:, k]
                out[:, k] = np.where(v >= 0, v / pos, v / neg)
        return out


@dataclass(frozen=True, eq=False)
class TimeWarp:
    """Warped time ``warped`` as a function of original time ``original``."""

    original: np.ndarray
    warped: np.ndarray
    rate: np.ndarray

    @property
    def duration_ratio(self) -> float:
        return float(self.warped[-1] / self.original[-1])


def time_warp(traj: JointTrajectory, caps: VelocityCaps, oversample: int = 8) -> TimeWarp:
    """Integrate the warp rate ``max(1, max_j |v_j| / cap_j)`` over the
    original timeline, on a grid ``oversample`` times finer than the samples."""
    t0 = traj.time[0]
    spline = CubicSpline(traj.time - t0, traj.angles, axis=0)
    fine = np.linspace(0.0, traj.duration, (traj.n_frames - 1) * oversample + 1)
    velocity = spline(fine, 1)
    ratio = caps.ratios(traj.joints, velocity)
    rate = np.maximum(1.0, ratio.max(axis=1)) if ratio.size else np.ones_like(fine)
    warped = cumulative_trapezoid(rate, fine, initial=0.0)
    return TimeWarp(fine, warped, rate)


def slow_down(traj: JointTrajectory, caps: VelocityCaps, oversample: int = 8) -> JointTrajectory:
    """Decelerate all joints locally and proportionally so that no joint
    exceeds its cap; the joint-space path is unchanged.

    The warped timeline is stretched by at most one sample so that the
    output ends on the original final pose and keeps the original step.
    """
    if traj.n_frames < 3:
        raise DomainError("slow_down needs at least 3 frames")
    metadata = dict(traj.metadata)
    metadata["slowed"] = "1"
    # Caps bound the sampled velocities every later stage sees; a trajectory
    # already within them is returned unchanged, which makes slow_down
    # idempotent.
    if caps.ratios(traj.joints, gradient(traj.angles, traj.dt)).max(initial=0.0) <= 1.0:
        return replace(traj, metadata=metadata)
    warp = time_warp(traj, caps, oversample)
    dt = traj.dt
    total = warp.warped[-1]
    steps = max(traj.n_frames - 1, math.ceil(total / dt - 1e-3))
    scale = steps * dt / total
    new_time = np.arange(steps + 1) * dt
    source_time = np.interp(new_time, warp.warped * scale, warp.original)
    source_time[-1] = warp.original[-1]
    if steps == traj.n_frames - 1 and np.all(warp.rate == 1.0):
        angles = traj.angles.copy()
    else:
        spline = CubicSpline(traj.time - traj.time[0], traj.angles, axis=0)
        angles = spline(source_time)
    return JointTrajectory(new_time + traj.time[0], angles, traj.joints, metadata)


# --------------------------------------------------------------------------
# Synthetic trajectories

def minjerk_profile(keyposes, durations, t):
    """Minimum-jerk interpolation through ``keyposes`` evaluated at times ``t``.

    Returns angle, velocity and acceleration arrays of shape
    ``(len(t), joints)``; velocity and acceleration vanish at every keypose.
    """
    keyposes = np.atleast_2d(np.asarray(keyposes, dtype=float))
    durations = np.atleast_1d(np.asarray(durations, dtype=float))
    if keyposes.shape[0] < 2:
        raise DomainError("need at least two keyposes")
    if durations.shape[0] != keyposes.shape[0] - 1:
        raise DomainError(f"{keyposes.shape[0]} keyposes need {keyposes.shape[0] - 1} durations")
    if np.any(durations <= 0):
        raise DomainError("durations must be positive")
    t = np.asarray(t, dtype=float)
    starts = np.concatenate([[0.0], np.cumsum(durations)])
    seg = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, durations.size - 1)
    T = durations[seg][:, None]
    s = np.clip((t - starts[seg])[:, None] / T, 0.0, 1.0)
    delta = keyposes[seg + 1] - keyposes[seg]
    pos = keyposes[seg] + delta * (10 * s**3 - 15 * s**4 + 6 * s**5)
    vel = delta * (30 * s**2 - 60 * s**3 + 30 * s**4) / T
    acc = delta * (60 * s - 180 * s**2 + 120 * s**3) / T**2
    return pos, vel, acc


def synthesize_minjerk(keyposes, durations, dt: float = 0.01,
                       joints: Sequence[str] = JOINT_NAMES,
                       metadata: Mapping | None = None) -> JointTrajectory:
    keyposes = np.atleast_2d(np.asarray(keyposes, dtype=float))
    if keyposes.shape[1] != len(joints):
        raise DomainError(f"keyposes have {keyposes.shape[1]} joints, expected {len(joints)}")
    total = float(np.sum(durations))
    n = int(round(total / dt)) + 1
    t = np.arange(n) * dt
    pos, _, _ = minjerk_profile(keyposes, durations, t)
    return JointTrajectory(t, pos, joints, metadata or {})


# --------------------------------------------------------------------------
# Kinematic summary

SUMMARY_PERCENTILES = (50.0, 99.0, 100.0)


def summarize_kinematics(trials: Sequence[JointTrajectory],
                         percentiles: Sequence[float] = SUMMARY_PERCENTILES,
                         joints: Sequence[str] = REPORTING_JOINTS) -> list[dict]:
    """Per task and joint: angle extremes, quartiles and directional speed
    percentiles over samples concatenated across trials.

    A positive-direction speed percentile ``p`` is ``max(0, P_p(v))`` and the
    negative-direction one is ``max(0, -P_(100-p)(v))``. The pseudo-task
    ``ALL`` pools every trial.
    """
    if len(trials) == 0:
        raise DomainError("no trials to summarize")
    groups: dict = {}
    for trial in trials:
        groups.setdefault(str(trial.metadata.get("task", "ALL")), []).append(trial)
    if "ALL" not in groups:
        groups["ALL"] = list(trials)
    rows = []
    for task in sorted(groups, key=lambda k: (k == "ALL", _task_order(k))):
        members = groups[task]
        for joint in joints:
            present = [t for t in members if joint in t.joints]
            if not present:
                continue
            angles = np.concatenate([t.column(joint) for t in present])
            speeds = np.concatenate([differentiate(t).column(joint) for t in present])
            q1, med, q3 = np.percentile(angles, [25, 50, 75])
            row = {"task": task, "joint": joint, "n_trials": len(present),
                   "angle_min": angles.min(), "angle_max": angles.max(),
                   "rom": angles.max() - angles.min(), "angle_q1": q1,
                   "angle_median": med, "angle_q3": q3}
            for p in percentiles:
                row[f"vel_pos_p{p:g}"] = max(0.0, float(np.percentile(speeds, p)))
                row[f"vel_neg_p{p:g}"] = max(0.0, -float(np.percentile(speeds, 100 - p)))
            rows.append(row)
    return rows


_ROMAN = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X")


def _task_order(task: str):
    return (_ROMAN.index(task), "") if task in _ROMAN else (len(_ROMAN), task)
