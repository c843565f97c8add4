import numpy as np
import pytest

from adlreq.chain import JOINT_NAMES, SegmentGeometry, build_default_chain
from adlreq.trajectory import JointTrajectory

# One line per acceptance criterion, filled by tests/test_acceptance.py.
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def geometry():
    return SegmentGeometry(0.30, 0.25, 0.18)


@pytest.fixture
def chain(geometry):
    return build_default_chain(geometry)


def static_pose(frames=3, dt=0.01, **angles):
    """Constant trajectory; joint angles in degrees by name, others zero."""
    row = np.array([angles.get(j, 0.0) for j in JOINT_NAMES])
    return JointTrajectory(np.arange(frames) * dt, np.tile(row, (frames, 1)))


def zero_rates(frames=3):
    return np.zeros((frames, len(JOINT_NAMES)))


def path_deviation(source, result, refine=100):
    """Largest joint-space distance (deg) from any sample of ``result`` to
    the path traced by ``source`` (cubic spline, densely sampled polyline)."""
    from scipy.interpolate import CubicSpline
    from scipy.spatial import cKDTree

    spline = CubicSpline(source.time, source.angles, axis=0)
    dense = spline(np.linspace(source.time[0], source.time[-1],
                               (source.n_frames - 1) * refine + 1))
    _, nearest = cKDTree(dense).query(result.angles)
    best = np.full(result.n_frames, np.inf)
    for shift in (-1, 0):
        i0 = np.clip(nearest + shift, 0, len(dense) - 2)
        a, b = dense[i0], dense[i0 + 1]
        ab = b - a
        denom = np.einsum("ij,ij->i", ab, ab)
        u = np.where(denom > 0, np.einsum("ij,ij->i", result.angles - a, ab)
                     / np.where(denom > 0, denom, 1.0), 0.0)
        u = np.clip(u, 0.0, 1.0)
        d = np.linalg.norm(result.angles - (a + u[:, None] * ab), axis=1)
        best = np.minimum(best, d)
    return float(best.max())
