"""Seeded minimum-jerk trials standing in for captured ADL motions."""
from __future__ import annotations

import numpy as np

from .chain import JOINT_NAMES
from .trajectory import JointTrajectory, synthesize_minjerk

# Sampling ranges (deg) for random keyposes, per chain joint.
JOINT_RANGES = {
    "shoulder_plane": (0.0, 90.0),
    "shoulder_elev": (10.0, 80.0),
    "SR": (-40.0, 60.0),
    "EF": (10.0, 130.0),
    "PS": (-60.0, 60.0),
    "WF": (-40.0, 40.0),
    "WD": (-15.0, 25.0),
}
REST_POSE = np.array([30.0, 15.0, 0.0, 20.0, 0.0, 0.0, 0.0])


def random_keyposes(rng: np.random.Generator, n_moves: int = 3) -> np.ndarray:
    lo = np.array([JOINT_RANGES[j][0] for j in JOINT_NAMES])
    hi = np.array([JOINT_RANGES[j][1] for j in JOINT_NAMES])
    inner = rng.uniform(lo, hi, size=(n_moves, len(JOINT_NAMES)))
    return np.vstack([REST_POSE, inner, REST_POSE])


def random_trial(rng: np.random.Generator, task: str = "I", subject: str = "S01",
                 repetition: int = 1, dt: float = 0.01, n_moves: int = 3,
                 duration_range=(0.8, 1.6), peak_speed: float | None = None) -> JointTrajectory:
    """A rest-to-rest trial through ``n_moves`` random keyposes.

    With ``peak_speed`` (deg/s) every segment is long enough that no joint
    exceeds it (minimum-jerk peak speed is ``1.875 * amplitude / duration``).
    """
    keys = random_keyposes(rng, n_moves)
    durations = rng.uniform(*duration_range, size=len(keys) - 1)
    if peak_speed is not None:
        amplitude = np.abs(np.diff(keys, axis=0)).max(axis=1)
        durations = np.maximum(durations, 1.875 * amplitude / peak_speed)
    durations = np.ceil(durations / dt) * dt
    meta = {"task": task, "subject": subject, "repetition": str(repetition), "source": "synthetic"}
    return synthesize_minjerk(keys, durations, dt, JOINT_NAMES, meta)
