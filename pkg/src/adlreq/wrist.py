"""Wrist actuation-axis optimization for serial and differential drives.

Axis A is the flexion/extension axis rotated by ``theta_a``, axis B the
deviation axis rotated by ``theta_b``; the anatomical baseline is
``theta_a = 0``, ``theta_b = 90``. Angles are in degrees, torques in N m,
velocities in deg/s, and powers in W (velocities are converted to rad/s
before multiplying).

Drive kinds:

* ``SO``  serial, orthogonal axes:       P = R(theta) (tau * nu)
* ``SNO`` serial, non-orthogonal axes:   P = M(theta_a, theta_b) (tau * nu)
* ``DO``  differential, orthogonal:      P = (Tt^-1 R tau) * (Tv^-1 R nu)
* ``DNO`` differential, non-orthogonal:  P = (Tt^-1 M^-T tau) * (Tv^-1 M nu)

with ``M = [[cos a, cos b], [sin a, sin b]]`` and ``R(theta) = M(theta,
theta + 90)``. The DNO torque map ``M^-T`` keeps the differential power
conserving and reduces to ``R`` for orthogonal axes; ``torque_map="direct"``
uses ``M`` for torques as well.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import CoincidentAxesError, DomainError

KINDS = ("SO", "SNO", "DO", "DNO")
SINGULAR_GUARD = 1e-3
DEFAULT_CAPS = (300.0, 102.0)

T_TAU = np.array([[1.0, 1.0], [1.0, -1.0]])
T_NU = np.array([[0.5, 0.5], [0.5, -0.5]])
T_TAU_INV = np.linalg.inv(T_TAU)
T_NU_INV = np.linalg.inv(T_NU)


def _cos_sin(theta):
    """Cosine and sine of degrees, exact at multiples of 90 so that the
    anatomical axes map samples without rounding."""
    theta = np.asarray(theta, dtype=float)
    r = np.radians(theta)
    c, s = np.cos(r), np.sin(r)
    quarter = np.remainder(theta, 90.0) == 0.0
    if np.any(quarter):
        k = np.remainder(np.round(theta / 90.0), 4)
        c = np.where(quarter, np.choose(k.astype(int) % 4, [1.0, 0.0, -1.0, 0.0]), c)
        s = np.where(quarter, np.choose(k.astype(int) % 4, [0.0, 1.0, 0.0, -1.0]), s)
    return c, s


def mixing_matrix(theta_a: float, theta_b: float):
    """Axis matrix ``M`` and its determinant ``sin(theta_b - theta_a)``."""
    (ca, sa), (cb, sb) = _cos_sin(theta_a), _cos_sin(theta_b)
    det = float(ca * sb - cb * sa)
    if abs(det) < SINGULAR_GUARD:
        raise CoincidentAxesError(f"axes at {theta_a:g} and {theta_b:g} deg coincide")
    M = np.array([[ca, cb], [sa, sb]], dtype=float)
    return M, det


def rotation(theta: float) -> np.ndarray:
    return mixing_matrix(theta, theta + 90.0)[0]


@dataclass(frozen=True)
class DriveConfig:
    kind: str
    theta_a: float = 0.0
    theta_b: float | None = None
    torque_map: str = "consistent"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.torque_map not in ("consistent", "direct"):
            raise DomainError("torque_map must be 'consistent' or 'direct'")
        if self.kind in ("SO", "DO"):
            expected = self.theta_a + 90.0
            if self.theta_b is not None and not np.isclose(self.theta_b, expected):
                raise DomainError(f"{self.kind} requires theta_b = theta_a + 90")
            object.__setattr__(self, "theta_b", expected)
        elif self.theta_b is None:
            raise DomainError(f"{self.kind} needs theta_b")
        mixing_matrix(self.theta_a, self.theta_b)

    @property
    def serial(self) -> bool:
        return self.kind in ("SO", "SNO")

    def normalized(self) -> "DriveConfig":
        """Equivalent angles with ``theta_a`` in [0, 180) and ``theta_b`` in [0, 360)."""
        a, b = self.theta_a, self.theta_b
        shift = 180.0 * np.floor(a / 180.0)
        a, b = a - shift, (b - shift) % 360.0
        return DriveConfig(self.kind, float(a), float(b), self.torque_map)


BASELINE = DriveConfig("SO", 0.0)


@dataclass(frozen=True, eq=False)
class WristSampleSet:
    """Paired WF/WD torques and velocities (column 0: WF, column 1: WD).

    Velocities are clamped to the caps on construction; ``angles`` are
    optional and only needed for range-of-motion reporting.
    """

    tau: np.ndarray
    nu: np.ndarray
    angles: np.ndarray | None = None
    caps: tuple = DEFAULT_CAPS

    def __post_init__(self):
        tau = np.atleast_2d(np.array(self.tau, dtype=float))
        nu = np.atleast_2d(np.array(self.nu, dtype=float))
        if tau.shape != nu.shape or tau.shape[1] != 2:
            raise DomainError("tau and nu must both have shape (samples, 2)")
        if tau.shape[0] == 0:
            raise DomainError("empty sample set")
        caps = np.asarray(self.caps, dtype=float)
        if caps.shape != (2,) or np.any(caps <= 0):
            raise DomainError("caps must be two positive velocities")
        nu = np.clip(nu, -caps, caps)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "caps", tuple(float(c) for c in caps))
        if self.angles is not None:
            angles = np.atleast_2d(np.array(self.angles, dtype=float))
            if angles.shape != tau.shape:
                raise DomainError("angles must match tau in shape")
            object.__setattr__(self, "angles", angles)

    def __len__(self):
        return self.tau.shape[0]

    @property
    def nu_rad(self) -> np.ndarray:
        return np.radians(self.nu)


# --------------------------------------------------------------------------
# Power model

def _trig(theta_a, theta_b):
    (ca, sa), (cb, sb) = _cos_sin(theta_a), _cos_sin(theta_b)
    return ca, sa, cb, sb


def _powers(kind, ca, sa, cb, sb, tau, nu, torque_map="consistent"):
    """Actuator powers for broadcastable axis trig values; returns (P_A, P_B)."""
    t1, t2 = tau[..., 0], tau[..., 1]
    v1, v2 = nu[..., 0], nu[..., 1]
    if kind in ("SO", "SNO"):
        w1, w2 = t1 * v1, t2 * v2
        return ca * w1 + cb * w2, sa * w1 + sb * w2
    nu1, nu2 = ca * v1 + cb * v2, sa * v1 + sb * v2
    if kind == "DNO" and torque_map == "consistent":
        det = ca * sb - cb * sa
        tq1, tq2 = (sb * t1 - sa * t2) / det, (ca * t2 - cb * t1) / det
    else:
        tq1, tq2 = ca * t1 + cb * t2, sa * t1 + sb * t2
    act_t1, act_t2 = 0.5 * (tq1 + tq2), 0.5 * (tq1 - tq2)
    act_v1, act_v2 = nu1 + nu2, nu1 - nu2
    return act_t1 * act_v1, act_t2 * act_v2


def actuator_power(config: DriveConfig, samples: WristSampleSet) -> np.ndarray:
    """Per-sample actuator powers, shape (samples, 2)."""
    ca, sa, cb, sb = _trig(config.theta_a, config.theta_b)
    pa, pb = _powers(config.kind, ca, sa, cb, sb, samples.tau, samples.nu_rad,
                     config.torque_map)
    return np.column_stack([pa, pb])


def objective(P) -> float:
    """Peak |power| of axis A plus peak |power| of axis B."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2 or P.shape[0] == 0:
        raise DomainError("P must be a nonempty (samples, 2) matrix")
    return float(np.abs(P[:, 0]).max() + np.abs(P[:, 1]).max())


# --------------------------------------------------------------------------
# Optimization

@dataclass(frozen=True)
class OptimizationResult:
    config: DriveConfig
    value: float
    baseline: float
    grid_value: float

    @property
    def reduction(self) -> float:
        """Fractional objective reduction relative to the anatomical baseline."""
        return 1.0 - self.value / self.baseline if self.baseline else 0.0


def _objective_at(kind, theta_a, theta_b, samples, torque_map):
    if abs(np.sin(np.radians(theta_b - theta_a))) < SINGULAR_GUARD:
        return np.inf
    cfg = DriveConfig(kind, theta_a, None if kind in ("SO", "DO") else theta_b, torque_map)
    return objective(actuator_power(cfg, samples))


def _grid_values(kind, grid_a, grid_b, samples, torque_map):
    """Objective over the grid, shape (len(grid_a), len(grid_b)); orthogonal
    kinds use a single column with theta_b = theta_a + 90."""
    tau = samples.tau[None, :, :]
    nu = samples.nu_rad[None, :, :]
    values = np.empty((len(grid_a), len(grid_b)))
    for i, a in enumerate(grid_a):
        b = grid_b[:, None] if kind in ("SNO", "DNO") else np.array([[a + 90.0]])
        ca, sa, cb, sb = _trig(a, b)
        singular = np.abs(np.sin(np.radians(b - a)))[:, 0] < SINGULAR_GUARD
        with np.errstate(divide="ignore", invalid="ignore"):
            pa, pb = _powers(kind, ca, sa, cb, sb, tau[..., :], nu, torque_map)
        row = np.abs(pa).max(axis=-1) + np.abs(pb).max(axis=-1)
        row[singular] = np.inf
        values[i] = row
    return values


def optimize(kind: str, samples: WristSampleSet, grid_step: float = 1.0, refine: bool = True,
             torque_map: str = "consistent") -> OptimizationResult:
    """Exhaustive grid search, optionally refined by Nelder-Mead.

    Orthogonal kinds search ``theta`` in [-90, 90); non-orthogonal kinds
    search ``theta_a`` in [-90, 90) and ``theta_b`` in [-180, 180), which
    contains every orthogonal configuration. Ties go to the smallest
    ``|theta_a|``, then ``|theta_b|``.
    """
    if kind not in KINDS:
        raise DomainError(f"kind must be one of {KINDS}")
    if len(samples) == 0:
        raise DomainError("empty sample set")
    grid_a = np.arange(-90.0, 90.0, grid_step)
    grid_b = np.arange(-180.0, 180.0, grid_step)
    values = _grid_values(kind, grid_a, grid_b if kind in ("SNO", "DNO") else grid_b[:1],
                          samples, torque_map)
    best = values.min()
    tol = 1e-12 * max(1.0, abs(best))
    candidates = np.argwhere(values <= best + tol)

    def angles(idx):
        a = grid_a[idx[0]]
        return (a, grid_b[idx[1]]) if kind in ("SNO", "DNO") else (a, a + 90.0)

    pairs = [angles(idx) for idx in candidates]
    theta_a, theta_b = min(pairs, key=lambda ab: (abs(ab[0]), abs(ab[1]), ab[0], ab[1]))
    value = _objective_at(kind, theta_a, theta_b, samples, torque_map)
    grid_value = value

    if refine:
        if kind in ("SO", "DO"):
            fun = lambda x: _objective_at(kind, x[0], x[0] + 90.0, samples, torque_map)
            x0 = [theta_a]
        else:
            fun = lambda x: _objective_at(kind, x[0], x[1], samples, torque_map)
            x0 = [theta_a, theta_b]
        res = minimize(fun, x0, method="Nelder-Mead",
                       options={"xatol": 1e-4, "fatol": 1e-12, "maxiter": 400,
                                "initial_simplex": _simplex(x0, grid_step)})
        if np.isfinite(res.fun) and res.fun < value:
            theta_a = float(res.x[0])
            theta_b = float(res.x[1]) if len(res.x) > 1 else theta_a + 90.0
            value = float(res.fun)

    if kind in ("SNO", "DNO"):
        # the orthogonal drive is a slice of the non-orthogonal one; never do worse
        ortho = optimize("SO" if kind == "SNO" else "DO", samples, grid_step, refine, torque_map)
        ortho_value = _objective_at(kind, ortho.config.theta_a, ortho.config.theta_b,
                                    samples, torque_map)
        if ortho_value < value:
            theta_a, theta_b, value = ortho.config.theta_a, ortho.config.theta_b, ortho_value

    config = DriveConfig(kind, theta_a, None if kind in ("SO", "DO") else theta_b,
                         torque_map).normalized()
    base = objective(actuator_power(BASELINE, samples))
    return OptimizationResult(config, value, base, grid_value)


def _simplex(x0, step):
    x0 = np.asarray(x0, dtype=float)
    pts = [x0]
    for k in range(x0.size):
        e = np.zeros_like(x0)
        e[k] = step
        pts.append(x0 + e)
    return np.array(pts)


# --------------------------------------------------------------------------
# Per-axis requirements

@dataclass(frozen=True)
class AxisRequirement:
    axis: str
    theta: float
    rom: float
    tau_max: float
    nu_max: float
    p_max: float
    rom_change: float = 0.0
    tau_change: float = 0.0
    nu_change: float = 0.0
    p_change: float = 0.0


def actuator_space(config: DriveConfig, samples: WristSampleSet):
    """Angles, torques and velocities seen by the two actuators."""
    M, _ = mixing_matrix(config.theta_a, config.theta_b)
    if config.serial:
        angle_map = torque_map = M
    else:
        angle_map = T_NU_INV @ M
        if config.kind == "DNO" and config.torque_map == "consistent":
            torque_map = T_TAU_INV @ np.linalg.inv(M).T
        else:
            torque_map = T_TAU_INV @ M
    angles = None if samples.angles is None else samples.angles @ angle_map.T
    return angles, samples.tau @ torque_map.T, samples.nu @ angle_map.T


def _pct(value, base):
    if base == 0:
        return 0.0 if value == 0 else float("inf")
    return 100.0 * (value - base) / base


def axis_requirements(config: DriveConfig, samples: WristSampleSet):
    """Range of motion and peak torque, velocity and power of axes A and B,
    with percent changes against the anatomical baseline."""
    def raw(cfg):
        angles, tau, nu = actuator_space(cfg, samples)
        P = actuator_power(cfg, samples)
        rom = (angles.max(axis=0) - angles.min(axis=0)) if angles is not None else np.zeros(2)
        return rom, np.abs(tau).max(axis=0), np.abs(nu).max(axis=0), np.abs(P).max(axis=0)

    cur, base = raw(config), raw(BASELINE)
    out = []
    for k, (name, theta) in enumerate((("A", config.theta_a), ("B", config.theta_b))):
        vals = [float(c[k]) for c in cur]
        changes = [_pct(float(c[k]), float(b[k])) for c, b in zip(cur, base)]
        out.append(AxisRequirement(name, float(theta), *vals, *changes))
    return tuple(out)
