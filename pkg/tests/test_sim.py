import numpy as np
import pytest

from activegrasp.sim import ExplorationSession, GraspSimulator
from activegrasp.viewsphere import SphericalPose, neighbor_pose, Direction, pose_cell


def test_view_is_cached(cube_sim):
    a = cube_sim.view(SphericalPose(45.0, 0.0))
    b = cube_sim.view(SphericalPose(45.0, 0.0))
    assert a is b
    # Equivalent pose after wrapping hits the same cache entry.
    c = cube_sim.view(SphericalPose(45.0, 360.0))
    assert a is c


def test_model_for_is_path_order_independent(cube_sim):
    start = SphericalPose(45.0, 0.0)
    a = SphericalPose(45.0, 20.0)
    b = SphericalPose(25.0, 0.0)
    m1 = cube_sim.model_for(start, [start, a, b])
    m2 = cube_sim.model_for(start, [start, b, a])
    assert m1 is m2  # same visited set, same memo entry
    assert np.array_equal(m1.object_points, m2.object_points)


def test_model_unexplored_shrinks_with_views(cube_sim):
    start = SphericalPose(45.0, 0.0)
    seq = [start]
    counts = []
    pose = start
    for d in (Direction.E, Direction.E, Direction.SE):
        pose = neighbor_pose(pose, d, cube_sim.cfg.viewsphere)
        seq.append(pose)
        counts.append(cube_sim.model_for(start, seq).unexplored.unexplored_count())
    assert all(b <= a for a, b in zip(counts, counts[1:]))


def test_best_grasp_memoized(cube_sim):
    start = SphericalPose(45.0, 0.0)
    seq = [start, SphericalPose(45.0, 180.0)]
    g1 = cube_sim.best_grasp(start, seq)
    g2 = cube_sim.best_grasp(start, seq)
    assert g1 is g2


def test_session_accounting(cfg, cube_sim):
    sess = ExplorationSession(cube_sim)
    assert sess.steps_used == 0
    assert sess.remaining_steps == cfg.episode.max_steps
    start = sess.pose
    nxt = neighbor_pose(start, Direction.E, cfg.viewsphere)
    sess.move_to(nxt, 1)
    assert sess.steps_used == 1
    assert pose_cell(sess.pose) == pose_cell(nxt)
    # Great-circle arc between two polar-45 poses 20 degrees of azimuth apart.
    cos_g = np.cos(np.radians(45.0)) ** 2 + np.sin(np.radians(45.0)) ** 2 * np.cos(
        np.radians(20.0)
    )
    expected = cfg.viewsphere.radius_m * np.arccos(cos_g)
    assert sess.travel_m == pytest.approx(expected, rel=1e-9)


def test_session_rejects_bad_costs(cfg, cube_sim):
    sess = ExplorationSession(cube_sim)
    nxt = neighbor_pose(sess.pose, Direction.E, cfg.viewsphere)
    with pytest.raises(ValueError):
        sess.move_to(nxt, 0)
    with pytest.raises(ValueError):
        sess.move_to(nxt, cfg.episode.max_steps + 1)


def test_session_state_snapshot(cube_sim):
    sess = ExplorationSession(cube_sim)
    st = sess.state()
    assert st.steps_used == 0
    assert len(st.visited) == 1
    assert st.model.unexplored.unexplored_count() > 0
    assert len(st.model.object_points) > 0


def test_simulator_accepts_mesh_name_or_mesh(cfg):
    from activegrasp.meshes import bundled_mesh

    s1 = GraspSimulator("prism_6x6x6", 0.0, cfg)
    s2 = GraspSimulator(bundled_mesh("prism_6x6x6"), 0.0, cfg)
    v1 = s1.view(SphericalPose(45.0, 0.0))
    v2 = s2.view(SphericalPose(45.0, 0.0))
    assert np.array_equal(v1.img.depth, v2.img.depth)
