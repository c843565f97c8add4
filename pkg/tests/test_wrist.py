import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adlreq.errors import CoincidentAxesError, DomainError
from adlreq.wrist import (BASELINE, KINDS, DriveConfig, WristSampleSet, _grid_values,
                          actuator_power, actuator_space, axis_requirements, mixing_matrix,
                          objective, optimize, rotation)

RAD = math.degrees(1.0)   # 1 rad/s expressed in deg/s


def samples_from_power(w, angles=None):
    """Sample set whose per-joint products tau * nu equal ``w`` (W)."""
    w = np.atleast_2d(w)
    return WristSampleSet(w, np.full_like(w, RAD), angles)


def random_samples(rng, n=300, caps=(300.0, 102.0)):
    tau = rng.normal(size=(n, 2)) * [1.0, 0.6]
    nu = rng.normal(size=(n, 2)) * [120.0, 60.0]
    return WristSampleSet(tau, nu, caps=caps)


# --------------------------------------------------------------------------
# Matrices and power model

def test_mixing_matrix_cases():
    M, det = mixing_matrix(0, 90)
    np.testing.assert_allclose(M, np.eye(2), atol=1e-15)
    with pytest.raises(CoincidentAxesError):
        mixing_matrix(40, 40)
    with pytest.raises(CoincidentAxesError):
        mixing_matrix(40, 220)
    _, det = mixing_matrix(23, 109)
    assert det == pytest.approx(math.sin(math.radians(86)), abs=1e-15)
    assert det == pytest.approx(0.99756405, abs=1e-8)


def test_so_identity_and_quarter_turn():
    rng = np.random.default_rng(0)
    s = random_samples(rng, 50)
    P = actuator_power(BASELINE, s)
    np.testing.assert_array_equal(P, s.tau * s.nu_rad)
    P90 = actuator_power(DriveConfig("SO", 90.0), samples_from_power([2.0, 3.0]))
    np.testing.assert_allclose(P90, [[-3.0, 2.0]], atol=1e-12)


def test_do_matrix_inversion_oracle():
    s = WristSampleSet([[1.0, 0.0]], [[RAD, 0.0]])
    P = actuator_power(DriveConfig("DO", 0.0), s)
    np.testing.assert_allclose(P, [[0.5, 0.5]], atol=1e-15)
    assert P.sum() == pytest.approx(1.0)


def test_objective_definition():
    assert objective([[1.0, -2.0], [0.5, 1.0]]) == 3.0
    assert objective(np.zeros((4, 2))) == 0.0
    rng = np.random.default_rng(1)
    P = rng.normal(size=(30, 2))
    assert objective(P[rng.permutation(30)]) == objective(P)
    with pytest.raises(DomainError):
        objective(np.zeros((0, 2)))


angles = st.floats(-180, 180)


@settings(max_examples=60, deadline=None)
@given(a=angles, b=angles, seed=st.integers(0, 1000))
def test_differential_power_conservation(a, b, seed):
    if abs(math.sin(math.radians(b - a))) < 0.05:
        return
    s = random_samples(np.random.default_rng(seed), 40)
    joint = (s.tau * s.nu_rad).sum(axis=1)
    for cfg in (DriveConfig("DO", a), DriveConfig("DNO", a, b)):
        np.testing.assert_allclose(actuator_power(cfg, s).sum(axis=1), joint, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(theta=angles, seed=st.integers(0, 1000))
def test_orthogonal_slices_agree(theta, seed):
    s = random_samples(np.random.default_rng(seed), 30)
    np.testing.assert_array_equal(
        actuator_power(DriveConfig("SNO", theta, theta + 90.0), s),
        actuator_power(DriveConfig("SO", theta), s))
    np.testing.assert_allclose(
        actuator_power(DriveConfig("DNO", theta, theta + 90.0), s),
        actuator_power(DriveConfig("DO", theta), s), rtol=0, atol=1e-12)


def test_direct_torque_map_option():
    s = random_samples(np.random.default_rng(2), 20)
    ortho = DriveConfig("DNO", 30.0, 120.0, torque_map="direct")
    np.testing.assert_allclose(actuator_power(ortho, s),
                               actuator_power(DriveConfig("DO", 30.0), s), atol=1e-12)
    skew = DriveConfig("DNO", 30.0, 100.0, torque_map="direct")
    joint = (s.tau * s.nu_rad).sum(axis=1)
    assert not np.allclose(actuator_power(skew, s).sum(axis=1), joint)


def test_velocities_are_clamped_to_caps():
    s = WristSampleSet([[1.0, 1.0]], [[500.0, -200.0]])
    np.testing.assert_array_equal(s.nu, [[300.0, -102.0]])


def test_drive_config_validation_and_normalization():
    with pytest.raises(DomainError):
        DriveConfig("XO")
    with pytest.raises(DomainError):
        DriveConfig("SO", 10.0, 50.0)
    with pytest.raises(DomainError):
        DriveConfig("SNO", 10.0)
    cfg = DriveConfig("SNO", -30.0, -100.0).normalized()
    assert (cfg.theta_a, cfg.theta_b) == (150.0, 80.0)
    s = random_samples(np.random.default_rng(4), 10)
    np.testing.assert_allclose(np.abs(actuator_power(cfg, s)),
                               np.abs(actuator_power(DriveConfig("SNO", -30.0, -100.0), s)),
                               atol=1e-12)
    np.testing.assert_allclose(rotation(0.0), np.eye(2), atol=1e-15)


# --------------------------------------------------------------------------
# Optimization

def test_wf_only_power_keeps_baseline():
    t = np.linspace(-1, 1, 41)
    s = WristSampleSet(np.column_stack([t, 0 * t]), np.column_stack([100 * t, 0 * t]))
    res = optimize("SO", s)
    assert res.config.theta_a == 0.0
    assert res.value == pytest.approx(np.abs(s.tau[:, 0] * s.nu_rad[:, 0]).max())
    assert res.reduction == pytest.approx(0.0)


@pytest.mark.parametrize("phi", [30.0, 65.0, 120.0])
def test_so_aligns_axis_with_oblique_power(phi):
    # P = R(theta) w rotates w by +theta, so the optimum maps the power
    # direction phi onto an axis: theta = -phi (mod 90), objective max|w|.
    s_vals = np.linspace(-1, 1, 41)
    s = samples_from_power(np.outer(s_vals, [math.cos(math.radians(phi)),
                                             math.sin(math.radians(phi))]))
    res = optimize("SO", s)
    residue = (res.config.theta_a + phi) % 90.0
    assert min(residue, 90.0 - residue) <= 1.0
    assert res.value == pytest.approx(1.0, abs=1e-6)


def test_sno_matches_fine_grid_oracle():
    phi = math.radians(30.0)
    s = samples_from_power(np.outer(np.linspace(-1, 1, 21), [math.cos(phi), math.sin(phi)]))
    res = optimize("SNO", s)
    grid_a = np.arange(-90.0, 90.0, 0.25)
    grid_b = np.arange(-180.0, 180.0, 0.25)
    oracle = _grid_values("SNO", grid_a, grid_b, s, "consistent").min()
    assert res.value <= oracle + 1e-9


@pytest.mark.parametrize("seed", range(3))
def test_configuration_nesting(seed):
    s = random_samples(np.random.default_rng(seed), 150)
    r = {k: optimize(k, s, grid_step=2.0) for k in KINDS}
    base = r["SO"].baseline
    assert r["SNO"].value <= r["SO"].value + 1e-9
    assert r["SO"].value <= base + 1e-9
    assert r["DNO"].value <= r["DO"].value + 1e-9
    assert r["DO"].value <= base + 1e-9


def test_optimize_rejects_unknown_kind():
    with pytest.raises(DomainError):
        optimize("XYZ", random_samples(np.random.default_rng(0), 5))


def test_optimize_is_deterministic():
    s = random_samples(np.random.default_rng(9), 100)
    a, b = optimize("DNO", s, grid_step=3.0), optimize("DNO", s, grid_step=3.0)
    assert a == b


# --------------------------------------------------------------------------
# Requirements

def test_baseline_requirements_have_zero_change():
    rng = np.random.default_rng(3)
    s = WristSampleSet(rng.normal(size=(40, 2)), rng.normal(size=(40, 2)) * 50,
                       rng.normal(size=(40, 2)) * 20)
    for req in axis_requirements(BASELINE, s):
        assert (req.rom_change, req.tau_change, req.nu_change, req.p_change) == (0, 0, 0, 0)


def test_differential_rom_of_deviation_motion():
    t = np.linspace(0, 1, 51)
    wd = 44.0 * t
    angles = np.column_stack([0 * t, wd])
    s = WristSampleSet(np.zeros((51, 2)), np.zeros((51, 2)), angles)
    A, B = axis_requirements(DriveConfig("DO", 0.0), s)
    assert A.rom == pytest.approx(44.0) and B.rom == pytest.approx(44.0)
    act_angles, _, _ = actuator_space(DriveConfig("DO", 0.0), s)
    np.testing.assert_allclose(act_angles[-1], [44.0, -44.0])
