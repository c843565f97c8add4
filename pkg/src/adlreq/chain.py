"""Serial upper-limb chain and the stack of dynamic limb models.

Base frame (right arm): +X anterior, +Y lateral, +Z superior; gravity acts
along -Z. In the zero pose the arm hangs at the side with the palm facing
medially, so every joint frame is aligned with the base frame and the limb
axis points along -Z.

Joint axes and their positive directions:

==============  ============  ==========================================
joint           axis (parent)  positive rotation
==============  ============  ==========================================
shoulder_plane  (0, 0, -1)    plane of elevation toward forward flexion
shoulder_elev   (1, 0, 0)     elevation away from the trunk
SR              (0, 0, -1)    glenohumeral internal rotation
EF              (0, -1, 0)    elbow flexion
PS              (0, 0, -1)    forearm pronation
WF              (-1, 0, 0)    wrist flexion (toward the palm)
WD              (0, 1, 0)     ulnar deviation
==============  ============  ==========================================

With ``shoulder_plane = 0`` elevation is abduction; with
``shoulder_plane = 90`` it is forward flexion.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, GeometryError

GRAVITY = 9.80665

JOINT_NAMES = ("shoulder_plane", "shoulder_elev", "SR", "EF", "PS", "WF", "WD")
REPORTING_JOINTS = ("SR", "EF", "PS", "WF", "WD")

# body name -> joint whose child frame carries it
BODY_JOINT = {"humerus": "SR", "ulna": "EF", "radius": "PS", "hand": "WD"}

DEFAULT_MASSES = (0.1, 0.5, 0.75, 1.0, 2.0)
DEFAULT_FRACTIONS = (1 / 8, 3 / 8, 5 / 8, 7 / 8)
DEFAULT_CYLINDER_DIAMETER = 0.10

_FEASIBILITY_TOL = 1e-12


def _frozen(values, shape) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SegmentGeometry:
    humerus_length: float
    ulna_length: float
    hand_length: float
    shoulder_offset: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("humerus_length", "ulna_length", "hand_length"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise GeometryError(f"{name} must be strictly positive, got {value}")
        offset = tuple(float(v) for v in self.shoulder_offset)
        if len(offset) != 3:
            raise GeometryError("shoulder_offset must be a 3-vector")
        object.__setattr__(self, "shoulder_offset", offset)

    def segment_length(self, body: str) -> float:
        return {"humerus": self.humerus_length, "ulna": self.ulna_length,
                "hand": self.hand_length}[body]

    def to_dict(self) -> dict:
        return {"humerus_length": self.humerus_length, "ulna_length": self.ulna_length,
                "hand_length": self.hand_length, "shoulder_offset": list(self.shoulder_offset)}

    @classmethod
    def from_dict(cls, data: dict) -> "SegmentGeometry":
        return cls(data["humerus_length"], data["ulna_length"], data["hand_length"],
                   tuple(data.get("shoulder_offset", (0.0, 0.0, 0.0))))


@dataclass(frozen=True, eq=False)
class Joint:
    name: str
    axis: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise GeometryError(f"joint {self.name} has a zero axis")
        object.__setattr__(self, "axis", _frozen(axis / norm, 3))
        object.__setattr__(self, "offset", _frozen(self.offset, 3))


@dataclass(frozen=True, eq=False)
class KinematicChain:
    """Revolute joints ordered proximal to distal.

    ``offset`` of joint *i* is the position of its origin in the frame of
    joint *i-1* (the base frame for the first joint). ``tip_offset`` locates
    the hand-frame origin (end of the hand) in the last joint frame.
    """

    joints: tuple
    geometry: SegmentGeometry
    tip_offset: np.ndarray = field(default_factory=lambda: _frozen((0, 0, 0), 3))

    def __post_init__(self):
        names = [j.name for j in self.joints]
        if len(set(names)) != len(names):
            raise GeometryError("joint names must be unique")
        missing = [j for j in REPORTING_JOINTS if j not in names]
        if missing:
            raise GeometryError(f"chain lacks reporting joints {missing}")
        for j in self.joints:
            if abs(np.linalg.norm(j.axis) - 1.0) > 1e-12:
                raise GeometryError(f"axis of {j.name} is not unit norm")
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "tip_offset", _frozen(self.tip_offset, 3))

    @property
    def names(self) -> tuple:
        return tuple(j.name for j in self.joints)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __len__(self):
        return len(self.joints)

    def forward_kinematics(self, q: np.ndarray):
        """Joint-frame orientations and origins for joint angles ``q`` (rad).

        ``q`` has shape ``(frames, n_joints)`` or ``(n_joints,)``. Returns
        ``(R, p)`` with shapes ``(frames, n, 3, 3)`` and ``(frames, n, 3)``,
        both expressed in the base frame.
        """
        q = np.atleast_2d(np.asarray(q, dtype=float))
        frames, n = q.shape
        if n != len(self.joints):
            raise DomainError(f"expected {len(self.joints)} joint angles, got {n}")
        R = np.empty((frames, n, 3, 3))
        p = np.empty((frames, n, 3))
        R_parent = np.broadcast_to(np.eye(3), (frames, 3, 3))
        p_parent = np.zeros((frames, 3))
        for i, joint in enumerate(self.joints):
            p[:, i] = p_parent + R_parent @ joint.offset
            R[:, i] = R_parent @ axis_angle_matrix(joint.axis, q[:, i])
            R_parent, p_parent = R[:, i], p[:, i]
        return R, p

    def tip_position(self, q: np.ndarray) -> np.ndarray:
        """Hand-frame origin (end of the hand) in the base frame."""
        R, p = self.forward_kinematics(q)
        return p[:, -1] + R[:, -1] @ self.tip_offset


def axis_angle_matrix(axis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rotation matrices about a fixed unit ``axis`` for each angle (rad)."""
    angles = np.asarray(angles, dtype=float)
    k = np.asarray(axis, dtype=float)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    s = np.sin(angles)[..., None, None]
    c = np.cos(angles)[..., None, None]
    return np.eye(3) + s * K + (1 - c) * (K @ K)


def build_default_chain(geometry: SegmentGeometry) -> KinematicChain:
    """Seven-joint right-arm chain (three shoulder revolutes, elbow, forearm, wrist)."""
    if not isinstance(geometry, SegmentGeometry):
        raise GeometryError("geometry must be a SegmentGeometry")
    down = (0.0, 0.0, -1.0)
    joints = (
        Joint("shoulder_plane", down, geometry.shoulder_offset),
        Joint("shoulder_elev", (1.0, 0.0, 0.0), (0, 0, 0)),
        Joint("SR", down, (0, 0, 0)),
        Joint("EF", (0.0, -1.0, 0.0), (0, 0, -geometry.humerus_length)),
        Joint("PS", down, (0, 0, 0)),
        Joint("WF", (-1.0, 0.0, 0.0), (0, 0, -geometry.ulna_length)),
        Joint("WD", (0.0, 1.0, 0.0), (0, 0, 0)),
    )
    return KinematicChain(joints, geometry, (0.0, 0.0, -geometry.hand_length))


def cylinder_inertia(mass: float, radius: float, length: float) -> np.ndarray:
    """Principal inertia of a solid cylinder about its CoM, axis along local z."""
    if mass < 0:
        raise DomainError(f"mass must be non-negative, got {mass}")
    if radius <= 0 or length <= 0:
        raise DomainError("radius and length must be positive")
    axial = 0.5 * mass * radius**2
    transverse = mass * (3 * radius**2 + length**2) / 12.0
    return np.diag([transverse, transverse, axial])


def box_inertia(mass: float, x: float, y: float, z: float) -> np.ndarray:
    """Principal inertia of a solid box with edge lengths ``x, y, z``."""
    if mass < 0:
        raise DomainError(f"mass must be non-negative, got {mass}")
    return mass / 12.0 * np.diag([y**2 + z**2, x**2 + z**2, x**2 + y**2])


@dataclass(frozen=True, eq=False)
class RigidBody:
    """Inertial parameters attached to one chain body.

    ``com`` is expressed in the frame of the joint carrying the body and
    ``inertia`` is taken about the CoM in that same frame.
    """

    body: str
    mass: float
    com: np.ndarray
    inertia: np.ndarray

    def __post_init__(self):
        if self.body not in BODY_JOINT:
            raise DomainError(f"unknown body {self.body!r}")
        if self.mass < 0:
            raise DomainError(f"mass must be non-negative, got {self.mass}")
        object.__setattr__(self, "com", _frozen(self.com, 3))
        object.__setattr__(self, "inertia", _frozen(self.inertia, (3, 3)))


@dataclass(frozen=True)
class CylinderSegment:
    attached_body: str
    mass: float
    com_fraction: float
    segment_length: float
    diameter: float = DEFAULT_CYLINDER_DIAMETER
    length: float | None = None

    def __post_init__(self):
        if self.attached_body not in ("humerus", "ulna"):
            raise DomainError("cylinders attach to the humerus or the ulna")
        if self.mass < 0:
            raise DomainError(f"mass must be non-negative, got {self.mass}")
        if self.segment_length <= 0 or self.diameter <= 0:
            raise GeometryError("segment length and diameter must be positive")
        if self.length is None:
            object.__setattr__(self, "length", self.segment_length / 4)
        half = self.length / 2
        d = self.com_distance
        if d < half - _FEASIBILITY_TOL or d > self.segment_length - half + _FEASIBILITY_TOL:
            raise DomainError(
                f"CoM fraction {self.com_fraction} puts the cylinder CoM at d={d:.5g} m; "
                f"it must lie within [{half:.5g}, {self.segment_length - half:.5g}] m")

    @property
    def com_distance(self) -> float:
        return self.com_fraction * self.segment_length

    def inertia(self) -> np.ndarray:
        return cylinder_inertia(self.mass, self.diameter / 2, self.length)

    def to_body(self) -> RigidBody:
        return RigidBody(self.attached_body, self.mass, (0, 0, -self.com_distance),
                         self.inertia())


# Reference hand: solid box 8 cm wide, 3 cm thick, CoM at 40 % of hand length.
_HAND_WIDTH = 0.08
_HAND_THICKNESS = 0.03
_HAND_COM_FRACTION = 0.4


@dataclass(frozen=True, eq=False)
class HandModel:
    mass: float
    com: np.ndarray
    inertia_per_kg: np.ndarray

    def __post_init__(self):
        if self.mass < 0:
            raise DomainError(f"mass must be non-negative, got {self.mass}")
        object.__setattr__(self, "com", _frozen(self.com, 3))
        object.__setattr__(self, "inertia_per_kg", _frozen(self.inertia_per_kg, (3, 3)))

    @classmethod
    def scaled(cls, mass: float, geometry: SegmentGeometry) -> "HandModel":
        """Reference hand scaled to ``mass``; inertia grows linearly with mass."""
        per_kg = box_inertia(1.0, _HAND_THICKNESS, _HAND_WIDTH, geometry.hand_length)
        return cls(mass, (0, 0, -_HAND_COM_FRACTION * geometry.hand_length), per_kg)

    def inertia(self) -> np.ndarray:
        return self.mass * self.inertia_per_kg

    def to_body(self) -> RigidBody:
        return RigidBody("hand", self.mass, self.com, self.inertia())


@dataclass(frozen=True, eq=False)
class LimbModel:
    """Inertial bodies of a limb; everything not listed is massless.

    Stack members carry exactly one massive body (``is_isolated``). Composite
    models built with :func:`combine` carry several and serve as the direct
    counterpart of torque superposition.
    """

    name: str
    bodies: tuple = ()
    source: CylinderSegment | HandModel | None = None

    def __post_init__(self):
        object.__setattr__(self, "bodies", tuple(self.bodies))

    @property
    def massive_bodies(self) -> tuple:
        return tuple(b for b in self.bodies if b.mass > 0)

    @property
    def is_isolated(self) -> bool:
        return len(self.massive_bodies) == 1

    @property
    def body(self) -> str | None:
        """Name of the single massive body, if the model is isolated."""
        return self.massive_bodies[0].body if self.is_isolated else None

    @classmethod
    def massless(cls, name: str = "massless") -> "LimbModel":
        return cls(name)

    @classmethod
    def from_source(cls, source: CylinderSegment | HandModel, name: str) -> "LimbModel":
        return cls(name, (source.to_body(),), source)


def combine(models: Sequence[LimbModel], name: str = "composite") -> LimbModel:
    return LimbModel(name, tuple(b for m in models for b in m.bodies))


def model_name(source: CylinderSegment | HandModel) -> str:
    if isinstance(source, HandModel):
        return f"hand_m{source.mass:g}"
    return f"{source.attached_body}_m{source.mass:g}_f{source.com_fraction:.6g}"


def generate_model_stack(geometry: SegmentGeometry,
                         masses: Sequence[float] = DEFAULT_MASSES,
                         fractions: Sequence[float] = DEFAULT_FRACTIONS,
                         diameter: float = DEFAULT_CYLINDER_DIAMETER) -> list[LimbModel]:
    """Humerus cylinders, ulna cylinders, then scaled hands.

    Yields ``2 * len(masses) * len(fractions) + len(masses)`` models; the
    defaults give the 45-model stack.
    """
    if len(masses) == 0:
        raise DomainError("masses must be nonempty")
    stack = []
    for body in ("humerus", "ulna"):
        seg = geometry.segment_length(body)
        for m in masses:
            for f in fractions:
                cyl = CylinderSegment(body, m, f, seg, diameter)
                stack.append(LimbModel.from_source(cyl, model_name(cyl)))
    for m in masses:
        hand = HandModel.scaled(m, geometry)
        stack.append(LimbModel.from_source(hand, model_name(hand)))
    for model in stack:
        if len(model.bodies) != 1:
            raise DomainError(f"{model.name} must carry exactly one body")
    return stack
