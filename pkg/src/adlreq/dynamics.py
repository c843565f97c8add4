"""Recursive Newton-Euler inverse dynamics for the limb chain and
single-rigid-body wrenches of manipulated objects.

Joint torques are the generalized forces the joint actuators must supply.
External wrenches are the wrench the hand exerts *on* the environment
(object, key, door); the environment therefore loads the hand with the
opposite wrench.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .chain import (BODY_JOINT, GRAVITY, REPORTING_JOINTS, KinematicChain, LimbModel,
                    box_inertia, cylinder_inertia)
from .errors import DomainError, WrongOperationError
from .trajectory import JointTrajectory, Partition, gradient

GRAVITY_VECTOR = np.array([0.0, 0.0, -GRAVITY])


@dataclass(frozen=True, eq=False)
class SpatialWrench:
    """Force (N) and moment (N m) in base-frame components, per frame.

    The moment is taken about the application point, which is fixed in the
    frame named by ``frame`` (``"hand"``: the wrist-joint frame carrying the
    hand) at coordinates ``point``.
    """

    force: np.ndarray
    moment: np.ndarray
    point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    frame: str = "hand"

    def __post_init__(self):
        force = np.atleast_2d(np.array(self.force, dtype=float))
        moment = np.atleast_2d(np.array(self.moment, dtype=float))
        if force.shape != moment.shape or force.shape[1] != 3:
            raise DomainError("force and moment must both have shape (frames, 3)")
        if not (np.all(np.isfinite(force)) and np.all(np.isfinite(moment))):
            raise DomainError("wrench components must be finite")
        object.__setattr__(self, "force", force)
        object.__setattr__(self, "moment", moment)
        object.__setattr__(self, "point", np.array(self.point, dtype=float).reshape(3))

    def __len__(self):
        return self.force.shape[0]

    def scaled(self, factor: float) -> "SpatialWrench":
        return replace(self, force=self.force * factor, moment=self.moment * factor)

    def as_array(self) -> np.ndarray:
        return np.hstack([self.force, self.moment])


@dataclass(frozen=True, eq=False)
class ObjectModel:
    """A manipulated object: either a rigid body of given mass or a static
    torque about a fixed axis (key and knob turning).

    ``dimensions`` are in mm: ``{"r", "h"}`` for cylinders and ``{"x", "y",
    "z"}`` for boxes. ``grasp_offset`` runs from the hand-frame origin to the
    object CoM, in hand-frame coordinates. ``supported`` objects (doors) rest
    on the environment, so the hand does not carry their weight.
    """

    name: str
    shape: str | None = None
    dimensions: Mapping = field(default_factory=dict)
    mass: float | None = None
    static_torque: float | None = None
    axis: tuple = (1.0, 0.0, 0.0)
    grasp_offset: tuple = (0.0, 0.0, 0.0)
    supported: bool = False

    def __post_init__(self):
        if (self.mass is None) == (self.static_torque is None):
            raise DomainError(f"{self.name}: set exactly one of mass and static_torque")
        if self.mass is not None:
            if self.mass < 0:
                raise DomainError(f"{self.name}: mass must be non-negative")
            if self.shape not in ("cylinder", "box"):
                raise DomainError(f"{self.name}: shape must be 'cylinder' or 'box'")
            needed = ("r", "h") if self.shape == "cylinder" else ("x", "y", "z")
            for key in needed:
                if self.dimensions.get(key, 0) <= 0:
                    raise DomainError(f"{self.name}: dimension {key} must be positive")
        object.__setattr__(self, "dimensions", dict(self.dimensions))

    @property
    def load(self) -> float:
        """The scalar that distinguishes variants: mass (kg) or torque (N m)."""
        return self.mass if self.mass is not None else self.static_torque

    @property
    def variant(self) -> str:
        unit = "kg" if self.mass is not None else "Nm"
        return f"{self.name}@{self.load:g}{unit}"

    def inertia(self) -> np.ndarray:
        d = {k: v / 1000.0 for k, v in self.dimensions.items()}
        if self.shape == "cylinder":
            return cylinder_inertia(self.mass, d["r"], d["h"])
        return box_inertia(self.mass, d["x"], d["y"], d["z"])


@dataclass(frozen=True)
class Provenance:
    task: str = ""
    subject: str = ""
    repetition: str = ""
    body: str = ""
    model: str = ""
    object: str = ""

    @property
    def trial(self) -> tuple:
        return (self.task, self.subject, self.repetition)


@dataclass(frozen=True, eq=False)
class TorqueRecord:
    """Joint torques (N m) of the reporting joints, with the paired angles
    (deg) and velocities (deg/s) of the trajectory that produced them."""

    time: np.ndarray
    torques: np.ndarray
    angles: np.ndarray
    velocities: np.ndarray
    provenance: Provenance = Provenance()
    joints: tuple = REPORTING_JOINTS

    def __post_init__(self):
        n = len(self.time)
        for name in ("torques", "angles", "velocities"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n, len(self.joints)):
                raise DomainError(f"{name} must have shape ({n}, {len(self.joints)})")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "time", np.asarray(self.time, dtype=float))
        object.__setattr__(self, "joints", tuple(self.joints))

    @property
    def n_frames(self) -> int:
        return len(self.time)

    def column(self, joint: str) -> np.ndarray:
        return self.torques[:, self.joints.index(joint)]


# --------------------------------------------------------------------------
# Inertial bookkeeping

def _skew_sq(r):
    """``|r|^2 I - r r^T``, the parallel-axis term."""
    return np.dot(r, r) * np.eye(3) - np.outer(r, r)


def lumped_inertia(chain: KinematicChain, model: LimbModel):
    """Mass, CoM and CoM inertia per chain joint frame, merging all bodies
    carried by the same frame."""
    n = len(chain)
    mass = np.zeros(n)
    com = np.zeros((n, 3))
    inertia = np.zeros((n, 3, 3))
    groups: dict = {}
    for body in model.bodies:
        groups.setdefault(chain.index(BODY_JOINT[body.body]), []).append(body)
    for i, bodies in groups.items():
        m = sum(b.mass for b in bodies)
        if m == 0:
            continue
        c = sum(b.mass * b.com for b in bodies) / m
        mass[i], com[i] = m, c
        inertia[i] = sum(b.inertia + b.mass * _skew_sq(b.com - c) for b in bodies)
    return mass, com, inertia


# --------------------------------------------------------------------------
# Recursive Newton-Euler

def _joint_states(chain, traj, velocities, accelerations):
    q_deg = traj.select(chain.names)
    if velocities is None:
        velocities = gradient(q_deg, traj.dt)
    if accelerations is None:
        accelerations = gradient(velocities, traj.dt)
    shape = q_deg.shape
    if np.shape(velocities) != shape or np.shape(accelerations) != shape:
        raise DomainError("velocities/accelerations must match the trajectory shape")
    return np.radians(q_deg), np.radians(velocities), np.radians(accelerations)


def _outward(chain, q, qd, qdd, gravity):
    """Link kinematics in base coordinates.

    Returns rotations, origins, angular velocity/acceleration and the origin
    acceleration offset by ``-gravity`` (so that gravity enters every body as
    an upward pseudo-acceleration).
    """
    frames, n = q.shape
    R, p = chain.forward_kinematics(q)
    w = np.zeros((frames, n, 3))
    dw = np.zeros((frames, n, 3))
    a = np.zeros((frames, n, 3))
    w_prev = np.zeros((frames, 3))
    dw_prev = np.zeros((frames, 3))
    a_prev = np.broadcast_to(-gravity, (frames, 3))
    p_prev = np.zeros((frames, 3))
    R_prev = np.broadcast_to(np.eye(3), (frames, 3, 3))
    for i, joint in enumerate(chain.joints):
        z = R_prev @ joint.axis
        r = p[:, i] - p_prev
        a[:, i] = a_prev + np.cross(dw_prev, r) + np.cross(w_prev, np.cross(w_prev, r))
        w[:, i] = w_prev + z * qd[:, i, None]
        dw[:, i] = dw_prev + z * qdd[:, i, None] + np.cross(w_prev, z * qd[:, i, None])
        w_prev, dw_prev, a_prev, p_prev, R_prev = w[:, i], dw[:, i], a[:, i], p[:, i], R[:, i]
    return R, p, w, dw, a


def joint_torques(chain: KinematicChain, model: LimbModel, q, qd, qdd,
                  external: SpatialWrench | None = None,
                  gravity: np.ndarray = GRAVITY_VECTOR) -> np.ndarray:
    """Generalized torques for every chain joint; angles in rad, shape (frames, n)."""
    q, qd, qdd = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (q, qd, qdd))
    frames, n = q.shape
    R, p, w, dw, a = _outward(chain, q, qd, qdd, gravity)
    mass, com, inertia = lumped_inertia(chain, model)

    hand = n - 1
    f_next = np.zeros((frames, 3))
    n_next = np.zeros((frames, 3))
    tau = np.zeros((frames, n))
    for i in range(n - 1, -1, -1):
        f = f_next.copy()
        m = n_next.copy()
        if i + 1 < n:
            m += np.cross(p[:, i + 1] - p[:, i], f_next)
        if mass[i] > 0:
            rc = R[:, i] @ com[i]
            ac = a[:, i] + np.cross(dw[:, i], rc) + np.cross(w[:, i], np.cross(w[:, i], rc))
            F = mass[i] * ac
            Iw = R[:, i] @ inertia[i] @ np.swapaxes(R[:, i], 1, 2)
            Iwv = np.einsum("fij,fj->fi", Iw, w[:, i])
            N = np.einsum("fij,fj->fi", Iw, dw[:, i]) + np.cross(w[:, i], Iwv)
            f += F
            m += N + np.cross(rc, F)
        if external is not None and i == hand:
            arm = R[:, i] @ external.point
            f += external.force
            m += external.moment + np.cross(arm, external.force)
        z = R[:, i] @ chain.joints[i].axis
        tau[:, i] = np.einsum("fi,fi->f", z, m)
        f_next, n_next = f, m
    return tau


def inverse_dynamics(chain: KinematicChain, model: LimbModel, traj: JointTrajectory,
                     external: SpatialWrench | None = None, *,
                     velocities=None, accelerations=None,
                     provenance: Provenance | None = None,
                     joints: Sequence[str] = REPORTING_JOINTS) -> TorqueRecord:
    """Joint torques producing ``traj`` for the inertial bodies of ``model``.

    Velocities and accelerations (deg/s, deg/s^2, one column per chain joint)
    default to second-order finite differences of the angles and of the
    velocities, respectively.
    """
    if external is not None and len(external) != traj.n_frames:
        if len(external) != 1:
            raise DomainError(f"wrench has {len(external)} frames, trajectory {traj.n_frames}")
    q, qd, qdd = _joint_states(chain, traj, velocities, accelerations)
    tau = joint_torques(chain, model, q, qd, qdd, external)
    cols = [chain.index(j) for j in joints]
    if provenance is None:
        md = traj.metadata
        provenance = Provenance(str(md.get("task", "")), str(md.get("subject", "")),
                                str(md.get("repetition", "")), model.body or "",
                                model.name)
    return TorqueRecord(traj.time, tau[:, cols], np.degrees(q[:, cols]),
                        np.degrees(qd[:, cols]), provenance, tuple(joints))


def mechanical_energy(chain: KinematicChain, model: LimbModel, q, qd,
                      gravity: np.ndarray = GRAVITY_VECTOR):
    """Kinetic and potential energy (J) per frame; angles in rad.

    Potential energy is zero at base height.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    qd = np.atleast_2d(np.asarray(qd, dtype=float))
    frames, n = q.shape
    R, p = chain.forward_kinematics(q)
    mass, com, inertia = lumped_inertia(chain, model)
    kinetic = np.zeros(frames)
    potential = np.zeros(frames)
    w_prev = np.zeros((frames, 3))
    v_prev = np.zeros((frames, 3))
    p_prev = np.zeros((frames, 3))
    R_prev = np.broadcast_to(np.eye(3), (frames, 3, 3))
    for i, joint in enumerate(chain.joints):
        z = R_prev @ joint.axis
        v = v_prev + np.cross(w_prev, p[:, i] - p_prev)
        w = w_prev + z * qd[:, i, None]
        if mass[i] > 0:
            rc = R[:, i] @ com[i]
            vc = v + np.cross(w, rc)
            Iw = R[:, i] @ inertia[i] @ np.swapaxes(R[:, i], 1, 2)
            kinetic += 0.5 * mass[i] * np.einsum("fi,fi->f", vc, vc)
            kinetic += 0.5 * np.einsum("fi,fij,fj->f", w, Iw, w)
            potential -= mass[i] * ((p[:, i] + rc) @ gravity)
        w_prev, v_prev, p_prev, R_prev = w, v, p[:, i], R[:, i]
    return kinetic, potential


# --------------------------------------------------------------------------
# Objects

def hand_pose(chain: KinematicChain, traj: JointTrajectory):
    """Hand-frame origin (m) and orientation matrices over the trajectory."""
    R, p = chain.forward_kinematics(np.radians(traj.select(chain.names)))
    return p[:, -1], R[:, -1]


def object_pose_from_hand(chain: KinematicChain, traj: JointTrajectory,
                          grasp_offset) -> np.ndarray:
    """Pose series ``(x, y, z, rx, ry, rz)`` of an object rigidly held in the
    hand; the rotation part is a rotation vector (rad)."""
    origin, R = hand_pose(chain, traj)
    position = origin + R @ np.asarray(grasp_offset, dtype=float)
    return np.hstack([position, Rotation.from_matrix(R).as_rotvec()])


def _angular_velocity(R: np.ndarray, dt: float) -> np.ndarray:
    dR = gradient(R.reshape(len(R), 9), dt).reshape(R.shape)
    S = dR @ np.swapaxes(R, 1, 2)
    S = 0.5 * (S - np.swapaxes(S, 1, 2))
    return np.stack([S[:, 2, 1], S[:, 0, 2], S[:, 1, 0]], axis=1)


def object_wrench(obj: ObjectModel, time, poses) -> SpatialWrench:
    """Wrench the hand must exert on ``obj`` to move it along ``poses``.

    ``poses`` is ``(frames, 6)``: CoM position (m) and orientation rotation
    vector (rad), uniformly sampled at ``time``. Force is ``m (a - g)`` and the
    moment about the CoM is ``I w' + w x I w``; the result is transported to
    the hand-frame origin through the grasp offset.
    """
    if obj.mass is None:
        raise WrongOperationError(f"{obj.name} is a static-torque object; "
                                  "use static_task_wrench")
    time = np.asarray(time, dtype=float)
    poses = np.asarray(poses, dtype=float)
    if poses.ndim != 2 or poses.shape[1] != 6 or poses.shape[0] != time.size:
        raise DomainError("poses must have shape (frames, 6) matching time")
    steps = np.diff(time)
    dt = float(steps.mean())
    if np.any(np.abs(steps - dt) > 1e-9):
        raise DomainError("pose samples must be uniform in time")
    position = poses[:, :3]
    R = Rotation.from_rotvec(poses[:, 3:]).as_matrix()
    acc = gradient(gradient(position, dt), dt)
    w = _angular_velocity(R, dt)
    dw = gradient(w, dt)
    gravity = np.zeros(3) if obj.supported else GRAVITY_VECTOR
    force = obj.mass * (acc - gravity)
    Iw = R @ obj.inertia() @ np.swapaxes(R, 1, 2)
    moment = np.einsum("fij,fj->fi", Iw, dw) + np.cross(w, np.einsum("fij,fj->fi", Iw, w))
    lever = R @ np.asarray(obj.grasp_offset, dtype=float)
    moment = moment + np.cross(lever, force)
    return SpatialWrench(force, moment)


def static_task_wrench(axis, torque: float, frames: int) -> SpatialWrench:
    """Constant pure moment ``torque * axis`` (base frame) applied by the hand."""
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0:
        raise DomainError("static torque axis must be nonzero")
    moment = np.tile(torque * axis / norm, (frames, 1))
    return SpatialWrench(np.zeros((frames, 3)), moment)


def object_torques(chain: KinematicChain, traj: JointTrajectory, wrench: SpatialWrench,
                   **kwargs) -> TorqueRecord:
    """Torques caused by the object alone: a massless limb under ``wrench``."""
    kwargs.setdefault("provenance", Provenance(
        str(traj.metadata.get("task", "")), str(traj.metadata.get("subject", "")),
        str(traj.metadata.get("repetition", "")), "Object"))
    return inverse_dynamics(chain, LimbModel.massless(), traj, wrench, **kwargs)


# --------------------------------------------------------------------------
# Combination and screening

def superpose(records: Sequence[TorqueRecord]) -> TorqueRecord:
    """Elementwise sum of torque records of the same trial."""
    if not records:
        raise DomainError("nothing to superpose")
    first = records[0]
    for rec in records[1:]:
        if rec.n_frames != first.n_frames or rec.joints != first.joints:
            raise DomainError("records differ in frame count or joints")
        if rec.provenance.trial != first.provenance.trial:
            raise DomainError(f"records belong to different trials: "
                              f"{rec.provenance.trial} vs {first.provenance.trial}")
    total = np.sum([r.torques for r in records], axis=0)
    names = sorted(r.provenance.model or r.provenance.object for r in records)
    prov = replace(first.provenance, body="composite", model="+".join(names), object="")
    return replace(first, torques=total, provenance=prov)


def screen_torque_outliers(records: Sequence[TorqueRecord]) -> Partition:
    """Exclude records whose peak |torque| at any joint exceeds three times
    the median peak of the group."""
    if len(records) == 0:
        raise DomainError("cannot screen an empty group")
    peaks = np.array([np.abs(r.torques).max(axis=0) for r in records])
    threshold = 3.0 * np.median(peaks, axis=0)
    kept, excluded, reasons = [], [], {}
    joints = records[0].joints
    for i, row in enumerate(peaks):
        over = np.where(row > threshold)[0]
        if over.size:
            j = over[0]
            excluded.append(i)
            reasons[i] = (f"torque-median: {joints[j]} peak {row[j]:.6g} > "
                          f"3 x median {threshold[j] / 3:.6g}")
        else:
            kept.append(i)
    return Partition(kept, excluded, reasons)
