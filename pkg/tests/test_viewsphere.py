import math

import numpy as np
import pytest

from activegrasp.viewsphere import (
    DIRECTION_ORDER,
    Direction,
    SphericalPose,
    ViewsphereConfig,
    arc_distance,
    camera_extrinsics,
    enumerate_neighbors,
    neighbor_pose,
    pose_cell,
    sphere_position,
    valid_directions,
)

CFG = ViewsphereConfig()


def test_direction_order_is_compass_clockwise():
    names = [d.name for d in DIRECTION_ORDER]
    assert names == ["N", "NE", "E", "SE", "S", "SW", "W", "NW"]


def test_sphere_position_pole_and_equator():
    center = np.array([0.1, -0.2, 0.05])
    top = sphere_position(SphericalPose(0.0, 0.0), CFG, center)
    assert np.allclose(top, center + [0.0, 0.0, 0.4])
    # polar 90, azimuth 0 lands on the +x axis of the center frame
    eq = sphere_position(SphericalPose(90.0, 0.0), CFG, center)
    assert np.allclose(eq, center + [0.4, 0.0, 0.0], atol=1e-12)


def test_camera_looks_at_center():
    center = np.array([0.0, 0.0, 0.12])
    for pose in (SphericalPose(45.0, 0.0), SphericalPose(85.0, 210.0), SphericalPose(10.0, 77.0)):
        R, t = camera_extrinsics(pose, CFG, center)
        fwd = R[:, 2]
        to_center = center - t
        to_center /= np.linalg.norm(to_center)
        assert np.allclose(fwd, to_center, atol=1e-12)
        # right-handed orthonormal frame
        assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
        # image y axis points away from world up: objects render upright
        assert R[2, 1] <= 0.0


def test_camera_equatorial_axes_explicit():
    # At polar 90, azimuth 0 the camera sits on +x looking along -x.
    center = np.zeros(3)
    R, t = camera_extrinsics(SphericalPose(90.0, 0.0), CFG, center)
    assert np.allclose(t, [0.4, 0.0, 0.0], atol=1e-12)
    assert np.allclose(R[:, 2], [-1.0, 0.0, 0.0], atol=1e-12)
    assert np.allclose(R[:, 1], [0.0, 0.0, -1.0], atol=1e-12)
    assert np.allclose(R[:, 0], [0.0, 1.0, 0.0], atol=1e-12)


def test_neighbor_semantics():
    p = SphericalPose(45.0, 0.0)
    n = neighbor_pose(p, Direction.N, CFG)
    assert n.polar_deg == pytest.approx(25.0)
    assert n.azimuth_deg == pytest.approx(0.0)
    e = neighbor_pose(p, Direction.E, CFG)
    assert e.polar_deg == pytest.approx(45.0)
    assert e.azimuth_deg == pytest.approx(20.0)
    se = neighbor_pose(p, Direction.SE, CFG)
    assert se.polar_deg == pytest.approx(65.0)
    assert se.azimuth_deg == pytest.approx(20.0)
    w = neighbor_pose(p, Direction.W, CFG)
    assert w.azimuth_deg == pytest.approx(340.0)


def test_neighbor_polar_clamp():
    # One step north of 25 reaches the 10 degree floor marker? No: 25-20=5 < 10 -> invalid.
    assert neighbor_pose(SphericalPose(25.0, 0.0), Direction.N, CFG) is None
    assert neighbor_pose(SphericalPose(85.0, 0.0), Direction.S, CFG) is None
    # The floor itself is reachable exactly from 30? 30-20=10 -> valid.
    got = neighbor_pose(SphericalPose(30.0, 0.0), Direction.N, CFG)
    assert got is not None and got.polar_deg == pytest.approx(10.0)


def test_azimuth_wraps():
    p = SphericalPose(45.0, 350.0)
    e = neighbor_pose(p, Direction.E, CFG)
    assert e.azimuth_deg == pytest.approx(10.0)
    w = neighbor_pose(SphericalPose(45.0, 10.0), Direction.W, CFG)
    assert w.azimuth_deg == pytest.approx(350.0)


def test_valid_directions_at_boundary():
    # Near the top ring every northward move is invalid: 5 remain.
    dirs = valid_directions(SphericalPose(10.0, 0.0), CFG)
    assert len(dirs) == 5
    assert Direction.N not in dirs and Direction.NE not in dirs and Direction.NW not in dirs
    # Interior pose keeps all 8.
    assert len(valid_directions(SphericalPose(45.0, 0.0), CFG)) == 8


def test_enumerate_neighbors_matches_valid_directions():
    p = SphericalPose(85.0, 120.0)
    pairs = enumerate_neighbors(p, CFG)
    assert [d for d, _ in pairs] == valid_directions(p, CFG)
    for d, q in pairs:
        assert q == neighbor_pose(p, d, CFG)


def test_arc_distance_one_step():
    # r * central angle: 0.4 m * 20 deg = 0.13963 m, frozen by hand.
    a = SphericalPose(45.0, 0.0)
    b = SphericalPose(45.0 - 20.0, 0.0)
    assert arc_distance(a, b, CFG) == pytest.approx(0.4 * math.radians(20.0), abs=1e-12)
    assert arc_distance(a, b, CFG) == pytest.approx(0.139626, abs=1e-6)


def test_arc_distance_symmetry_and_identity():
    a = SphericalPose(45.0, 30.0)
    b = SphericalPose(65.0, 50.0)
    assert arc_distance(a, a, CFG) == pytest.approx(0.0, abs=1e-12)
    assert arc_distance(a, b, CFG) == pytest.approx(arc_distance(b, a, CFG))
    # Diagonal steps cover more ground than either single-axis step.
    n = SphericalPose(25.0, 30.0)
    assert arc_distance(a, b, CFG) > arc_distance(a, n, CFG)


def test_pose_cell_quantizes():
    assert pose_cell(SphericalPose(45.0, 0.0)) == (45000, 0)
    assert pose_cell(SphericalPose(45.0, 360.0)) == (45000, 0)
    assert pose_cell(SphericalPose(45.0, -20.0)) == pose_cell(SphericalPose(45.0, 340.0))
    # Distinguishes nearby but distinct grid poses.
    assert pose_cell(SphericalPose(45.0, 20.0)) != pose_cell(SphericalPose(45.0, 0.0))


def test_viewsphere_config_validation():
    with pytest.raises(ValueError):
        ViewsphereConfig(radius_m=-1.0)
    with pytest.raises(ValueError):
        ViewsphereConfig(polar_min_deg=50.0, polar_max_deg=40.0)
