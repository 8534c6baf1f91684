import math

import numpy as np
import pytest

from activegrasp.cloud import SceneModel, UnexploredGrid
from activegrasp.grasp import (
    GraspParams,
    GripperModel,
    contact_patch_area,
    estimate_normals,
    grasp_collides,
    gravity_misalignment_deg,
    pair_quality_deg,
    select_best_grasp,
    synthesize_grasps,
)
from activegrasp.meshes import make_icosphere

GRIPPER = GripperModel()
PARAMS = GraspParams()


def _grid_plate(x, half=0.03, z0=0.02, step=0.005):
    """Vertical plate at fixed x, normal along x, sampled on a 5 mm grid."""
    ys = np.arange(-half, half + 1e-9, step)
    zs = np.arange(z0, z0 + 2 * half + 1e-9, step)
    gy, gz = np.meshgrid(ys, zs)
    return np.column_stack([np.full(gy.size, float(x)), gy.ravel(), gz.ravel()])


def _empty_grid():
    return UnexploredGrid(np.empty((0, 3)), np.zeros(0, dtype=bool), 0.01)


def _model(obj, unexplored_pts=None):
    if unexplored_pts is None:
        grid = _empty_grid()
    else:
        grid = UnexploredGrid(unexplored_pts, np.zeros(len(unexplored_pts), dtype=bool), 0.01)
    return SceneModel(obj, np.empty((0, 3)), grid)


def test_estimate_normals_on_plane():
    plate = _grid_plate(0.0)
    normals, curv = estimate_normals(plate, k=16)
    assert np.allclose(np.abs(normals[:, 0]), 1.0, atol=1e-9)
    assert np.allclose(curv, 0.0, atol=1e-9)


def test_estimate_normals_on_sphere():
    mesh = make_icosphere(radius=0.05, subdivisions=2)
    pts = mesh.vertices
    normals, curv = estimate_normals(pts, k=16)
    radial = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    dots = np.abs(np.einsum("ij,ij->i", normals, radial))
    assert np.quantile(dots, 0.05) > 0.95
    # Curved but smooth: strictly positive, well below the scatter ceiling.
    assert curv.mean() > 1e-4
    assert curv.max() < 0.1


def test_contact_patch_area_flat_disk():
    # The measure is occupied-cell area: at least the true disk area, at most
    # the area of every cell the disk touches, and saturated once sampling is
    # dense enough that each touched cell holds a point.
    contact = np.array([0.0, 0.0, 0.07])
    normal = np.array([1.0, 0.0, 0.0])
    r, cell = 0.012, 0.0045
    dense = contact_patch_area(
        _grid_plate(0.0, half=0.05, step=0.001), contact, normal, r, cell_m=cell, slab_m=0.006
    )
    denser = contact_patch_area(
        _grid_plate(0.0, half=0.05, step=0.0005), contact, normal, r, cell_m=cell, slab_m=0.006
    )
    assert dense == denser  # saturated: occupancy no longer grows
    disk = math.pi * r * r
    touched = math.pi * (r + cell * math.sqrt(2) / 2) ** 2
    assert disk * 0.95 <= dense <= touched * 1.05


def test_contact_patch_area_counts_cells_exactly():
    # Points placed in well separated cells contribute one cell each.
    cell = 0.0045
    pts = np.array([[0.0, 0.0, 0.05], [0.0, 3 * cell, 0.05], [0.0, 0.0, 0.05 + 3 * cell]])
    area = contact_patch_area(
        pts, pts[0], np.array([1.0, 0.0, 0.0]), radius_m=0.1, cell_m=cell, slab_m=0.006
    )
    assert area == pytest.approx(3 * cell * cell, abs=1e-12)


def test_contact_patch_area_empty_far_away():
    plate = _grid_plate(0.0)
    contact = np.array([0.0, 0.5, 0.5])
    area = contact_patch_area(
        plate, contact, np.array([1.0, 0.0, 0.0]), 0.012, cell_m=0.0045, slab_m=0.006
    )
    assert area == 0.0


def test_pair_quality_examples():
    a = np.zeros(3)
    b = np.array([0.05, 0.0, 0.0])
    # Perfectly opposed face normals.
    assert pair_quality_deg(a, b, [-1, 0, 0], [1, 0, 0]) == pytest.approx(180.0)
    # Sign convention does not matter.
    assert pair_quality_deg(a, b, [1, 0, 0], [1, 0, 0]) == pytest.approx(180.0)
    # Same flat face: normals orthogonal to the axis.
    assert pair_quality_deg(a, b, [0, 0, 1], [0, 0, 1]) == pytest.approx(0.0)
    # Adjacent cube faces meet at 90 degrees across a diagonal axis.
    c = np.array([0.03, 0.03, 0.0])
    q = pair_quality_deg(a, c, [0, 1, 0], [1, 0, 0])
    assert q == pytest.approx(90.0, abs=1e-9)
    # 10 and 20 degree tilts cost exactly their sum.
    na = [-math.cos(math.radians(10)), math.sin(math.radians(10)), 0.0]
    nb = [math.cos(math.radians(20)), math.sin(math.radians(20)), 0.0]
    assert pair_quality_deg(a, b, na, nb) == pytest.approx(150.0, abs=1e-9)


def test_gravity_misalignment():
    assert gravity_misalignment_deg(np.array([1.0, 0.0, 0.0])) == pytest.approx(0.0)
    assert gravity_misalignment_deg(np.array([0.0, 0.0, 1.0])) == pytest.approx(90.0)
    assert gravity_misalignment_deg(np.array([1.0, 0.0, 1.0])) == pytest.approx(45.0)


def test_synthesize_on_parallel_plates():
    obj = np.vstack([_grid_plate(-0.02), _grid_plate(0.02)])
    grasps = synthesize_grasps(_model(obj), GRIPPER, PARAMS, limit=5)
    assert grasps
    best = grasps[0]
    assert best.quality_deg >= 175.0
    assert best.width_m == pytest.approx(0.04, abs=1e-6)
    assert abs(best.axis[0]) == pytest.approx(1.0, abs=1e-6)
    # Horizontal axis: no gravity penalty, score equals quality.
    assert best.score == pytest.approx(best.quality_deg, abs=1e-6)


def test_synthesize_rejects_wide_pairs():
    obj = np.vstack([_grid_plate(-0.05), _grid_plate(0.05)])
    assert select_best_grasp(_model(obj), GRIPPER, PARAMS) is None


def test_unexplored_veto_blocks_then_clears():
    obj = np.vstack([_grid_plate(-0.02), _grid_plate(0.02)])
    # Fill the volume just outside the +x plate, where that finger must go.
    xs = np.arange(0.026, 0.046, 0.01)
    ys = np.arange(-0.03, 0.031, 0.01)
    zs = np.arange(0.02, 0.081, 0.01)
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    occ = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    blocked = _model(obj, unexplored_pts=occ)
    assert select_best_grasp(blocked, GRIPPER, PARAMS) is None
    # Marking the same cells explored lifts the veto.
    grid = UnexploredGrid(occ, np.ones(len(occ), dtype=bool), 0.01)
    cleared = SceneModel(obj, np.empty((0, 3)), grid)
    got = select_best_grasp(cleared, GRIPPER, PARAMS)
    assert got is not None and got.quality_deg >= 175.0


def test_grasp_collides_direct():
    obj = np.vstack([_grid_plate(-0.02), _grid_plate(0.02)])
    a = np.array([-0.02, 0.0, 0.05])
    b = np.array([0.02, 0.0, 0.05])
    point_in_finger = np.array([[0.035, 0.0, 0.05]])
    model = _model(obj, unexplored_pts=point_in_finger)
    assert grasp_collides(a, b, model, GRIPPER, PARAMS)
    model2 = _model(obj, unexplored_pts=np.array([[0.2, 0.2, 0.2]]))
    assert not grasp_collides(a, b, model2, GRIPPER, PARAMS)


def test_synthesis_is_deterministic():
    obj = np.vstack([_grid_plate(-0.02), _grid_plate(0.02)])
    g1 = synthesize_grasps(_model(obj), GRIPPER, PARAMS, limit=10)
    g2 = synthesize_grasps(_model(obj), GRIPPER, PARAMS, limit=10)
    assert [g.score for g in g1] == [g.score for g in g2]
    assert all(np.array_equal(x.point_a, y.point_a) for x, y in zip(g1, g2))


def test_high_curvature_contacts_rejected():
    # A thin spiky wedge: apex line has high curvature, faces are small.
    rng = np.random.default_rng(4)
    pts = rng.normal(0.0, 0.004, (300, 3)) + [0.0, 0.0, 0.05]
    model = _model(pts)
    got = select_best_grasp(model, GRIPPER, PARAMS)
    # Pure noise blob: curvature filter leaves nothing graspable.
    assert got is None
