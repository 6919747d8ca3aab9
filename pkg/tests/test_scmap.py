import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polysle.driving import driven_path
from polysle.geometry import PrevertexConfig
from polysle.scmap import (
    CorrectedMap,
    QuadratureError,
    ScEvaluator,
    corner_trajectory,
    corrected_map_eval,
    drift_correction_rate,
    polygon_snapshot,
    sc_deriv,
    sc_eval,
    sc_log_deriv_sum,
)
from polysle.verify import boundary_checks

CUBIC = ScEvaluator((-1.0, 1.0), (-1.0, -1.0))
ARCSINE = ScEvaluator((-1.0, 1.0), (0.5, 0.5))


def test_cubic_values():
    assert sc_eval(CUBIC, 2.0) == pytest.approx(2 / 3, abs=1e-14)
    rng = np.random.default_rng(3)
    for z in rng.uniform(-3, 3, 20) + 1j * rng.uniform(0, 3, 20):
        assert abs(sc_eval(CUBIC, z) - (z ** 3 / 3 - z)) <= 1e-10


def test_basepoint_maps_to_zero():
    assert sc_eval(ARCSINE, 0.0) == 0
    assert sc_eval(ScEvaluator((-3.0, 0.5, 2.0), (0.2, 0.9, -0.4)), 0j) == 0


def test_arcsine_gap():
    assert abs(abs(sc_eval(ARCSINE, 1.0) - sc_eval(ARCSINE, -1.0)) - math.pi) <= 1e-8


def test_corner_at_infinity_rejected():
    ev = ScEvaluator((-1.0, 1.0), (1.0, 0.5))
    with pytest.raises(QuadratureError):
        sc_eval(ev, -1.0)


def test_deriv_examples():
    assert sc_deriv(CUBIC, 0.0) == pytest.approx(-1.0)
    flat = ScEvaluator((-1.0, 2.0), (0.0, 0.0))
    assert np.allclose(sc_deriv(flat, np.array([0.3 + 1j, -5.0, 7j])), 1.0)
    with pytest.raises(ValueError):
        sc_deriv(CUBIC, 1.0)


def test_log_deriv_examples():
    assert sc_log_deriv_sum(ScEvaluator((-1.0, 1.0), (0.3, 0.3)), 0.0) == pytest.approx(0.0)
    assert sc_log_deriv_sum(ScEvaluator((-1.0, 1.0), (1.0, 0.0)), 0.0) == pytest.approx(-1.0)
    assert sc_log_deriv_sum(ScEvaluator((0.0,), (1.0,)), 2.0) == -0.5
    with pytest.raises(ValueError):
        sc_log_deriv_sum(CUBIC, -1.0)


GENERIC = ScEvaluator((-2.0, -0.5, 1.0, 2.5), (0.4, -0.3, 0.7, 0.2))


@pytest.mark.parametrize("z", [0.3 + 0.4j, -1.0 + 0.2j, 2.0 + 1.5j, -3 + 0.1j])
def test_derivative_matches_difference_quotient(z):
    errs = []
    for h in (1e-2, 5e-3):
        fd = (sc_eval(GENERIC, z + h) - sc_eval(GENERIC, z - h)) / (2 * h)
        errs.append(abs(fd - sc_deriv(GENERIC, z)))
    assert errs[1] < errs[0] / 3  # second order
    assert errs[1] < 1e-4


@pytest.mark.parametrize("z", [0.3 + 0.4j, 1.7 + 0.01j, -2.4 + 2j])
def test_log_deriv_matches_difference_quotient(z):
    h = 1e-6
    fd = (np.log(sc_deriv(GENERIC, z + h)) - np.log(sc_deriv(GENERIC, z - h))) / (2 * h)
    assert abs(fd - sc_log_deriv_sum(GENERIC, z)) <= 1e-8 * max(1.0, abs(fd))


def test_path_independence():
    z = 1.8 + 0.9j
    direct = sc_eval(GENERIC, z)
    other = sc_eval(GENERIC, z, path=[0j, 0.2 + 2j, -1 + 3j, z])
    assert abs(direct - other) <= 1e-10


def test_path_through_prevertex_rejected():
    with pytest.raises(QuadratureError):
        sc_eval(GENERIC, 1.5, path=[0j, 1.5 + 0j])


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=5, unique=True),
       st.lists(st.floats(-0.95, 0.95), min_size=5, max_size=5))
def test_straight_sides_and_turning(zs, bs):
    zs = sorted(z for z in zs if abs(z) > 0.05)
    if len(zs) < 2 or min(np.diff(zs)) < 0.05:
        return
    ev = ScEvaluator(tuple(zs), tuple(bs[: len(zs)]))
    bc = boundary_checks(ev)
    assert bc["straightness"] <= 1e-8
    assert bc["turning"] <= 1e-6


def test_drift_rate_examples():
    ev = ScEvaluator((-1.0, 1.0), (0.4, 0.4))
    assert drift_correction_rate(ev, 0.0) == 0
    flat = ScEvaluator((-1.0, 2.0), (0.0, 0.0))
    assert drift_correction_rate(flat, 0.5) == 0
    with pytest.raises(ValueError):
        drift_correction_rate(ev, 1.5)


def test_drift_rate_linear_near_zero():
    ev = ScEvaluator((-1.0, 1.0), (0.4, 0.4))
    r1, r2 = (drift_correction_rate(ev, w) for w in (1e-3, 2e-3))
    rm = drift_correction_rate(ev, -1e-3)
    assert abs(r2 / r1 - 2.0) < 1e-2
    assert abs(rm + r1) < 1e-12
    # series about 0: rate ~ SC'(0) * sum_j beta_j (2/Z_j) / (0 - Z_j) * W
    slope = cmath.exp(-0.4j * math.pi) * (-2 * 0.4 * 2)
    assert abs(r1 / 1e-3 - slope) < 1e-2 * abs(slope)


def test_drift_rate_explicit_speeds_agree():
    ev = ScEvaluator((-1.5, 0.8, 2.0), (0.3, 0.5, -0.2))
    W = 0.2
    zdot = 2.0 / (np.array(ev.prevertices) - W)
    assert drift_correction_rate(ev, W, zdot) == pytest.approx(drift_correction_rate(ev, W), rel=1e-12)


def test_drift_rate_against_time_difference():
    # d/dt SC_t(W) with Z moving at 2/(Z - W): compare with a finite difference in t
    Z = np.array([-1.5, 0.8, 2.0])
    b = (0.3, 0.5, -0.2)
    W = 0.2
    h = 1e-6
    zdot = 2.0 / (Z - W)
    ev_p = ScEvaluator(tuple(Z + h * zdot), b)
    ev_m = ScEvaluator(tuple(Z - h * zdot), b)
    fd = (sc_eval(ev_p, W) - sc_eval(ev_m, W)) / (2 * h)
    assert abs(fd - drift_correction_rate(ScEvaluator(tuple(Z), b), W)) < 1e-7


def test_corrected_map():
    cm = CorrectedMap(ARCSINE, 0.25 + 0.5j)
    assert corrected_map_eval(cm, 0.5) == sc_eval(ARCSINE, 0.5) - (0.25 + 0.5j)
    flat = CorrectedMap(ScEvaluator((-1.0, 2.0), (0.0, 0.0)), 0j)
    for z in (0.3 + 2j, -4.0, 1.5 + 0.1j):
        assert abs(corrected_map_eval(flat, z) - z) <= 1e-14


def test_square_snapshot():
    cfg = PrevertexConfig((-2.0, -1.0, 1.0, 2.0), (0.5,) * 4, 4.0)
    path = driven_path(cfg, np.zeros(11), 1e-4)
    snap = polygon_snapshot(path, 0.0)
    pos = snap.finite_positions()
    assert len(pos) == 4
    assert snap.turning_sum == 2.0 and snap.closed
    sides = [abs(pos[(k + 1) % 4] - pos[k]) for k in range(4)]
    turns = [cmath.phase((pos[(k + 2) % 4] - pos[(k + 1) % 4]) / (pos[(k + 1) % 4] - pos[k]))
             for k in range(4)]
    assert np.allclose(np.abs(turns), math.pi / 2, atol=1e-9)
    assert sides[0] == pytest.approx(sides[2], rel=1e-10)


def test_flat_snapshot_is_prevertices():
    cfg = PrevertexConfig((-1.0, 2.0), (0.0, 0.0), 2.0)
    path = driven_path(cfg, np.linspace(0, 0.001, 11), 1e-4)
    snap = polygon_snapshot(path, 0.0)
    assert np.allclose(snap.finite_positions(), [-1.0, 2.0], atol=1e-14)
    later = polygon_snapshot(path, 0.001)
    assert np.allclose(later.finite_positions(), path.Z[-1] - path.D[-1], atol=1e-14)


def test_corner_at_infinity_in_snapshot():
    cfg = PrevertexConfig((-1.0, 1.0), (1.0, 0.5), 2.0)
    snap = polygon_snapshot(driven_path(cfg, np.zeros(3), 1e-4), 0.0)
    assert snap.corners[0].at_infinity
    assert not snap.corners[1].at_infinity


def test_flat_corner_velocity_is_loewner_speed():
    cfg = PrevertexConfig((-1.0, 2.0), (0.0, 0.0), 4.0)
    path = driven_path(cfg, np.linspace(0, 0.003, 101), 1e-4)
    tr = corner_trajectory(path, 1)
    Z = np.interp(tr.velocity_times, path.t, path.Z[:, 1])
    W = np.interp(tr.velocity_times, path.t, path.W)
    assert np.allclose(tr.velocities, 2.0 / (Z - W), rtol=1e-9)


def test_mirror_corners_move_symmetrically():
    cfg = PrevertexConfig((-1.0, 1.0), (0.3, 0.3), 4.0)
    path = driven_path(cfg, np.zeros(101), 1e-4)
    v0 = corner_trajectory(path, 0).velocities
    v1 = corner_trajectory(path, 1).velocities
    e = cmath.exp(-1j * math.pi * 0.3)  # direction of the side through f(0)
    # reflection across the line through 0 perpendicular to that side
    assert np.allclose(v1, -e * e * np.conj(v0), atol=1e-9)


def test_snapshot_displacement_bounded_by_velocity():
    cfg = PrevertexConfig((-1.0, 1.5), (0.4, 0.3), 4.0)
    path = driven_path(cfg, np.linspace(0, 0.002, 21), 1e-4)
    tr = corner_trajectory(path, 0, velocity_times=[0.5e-4])
    t = 1e-3
    disp = abs(polygon_snapshot(path, t).finite_positions()[0]
               - polygon_snapshot(path, 0.0).finite_positions()[0])
    assert disp <= 1.5 * abs(tr.velocities[0]) * t
