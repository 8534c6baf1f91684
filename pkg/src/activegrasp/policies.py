"""Next-viewpoint policies.

Every policy is a pure function `(state, ctx) -> PolicyDecision`. The state
carries only what a robot would actually know: the fused partial model and
the episode bookkeeping. The one deliberate exception is the breadth-first
baseline, which is given the simulator itself so it can report the true
shortest number of views; it exists to lower-bound everything else.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .cloud import SceneModel
from .config import RunConfig
from .grasp import estimate_normals
from .scene import project_points
from .sim import ExplorationState, GraspSimulator
from .viewsphere import (
    DIRECTION_ORDER,
    Direction,
    SphericalPose,
    arc_distance,
    camera_extrinsics,
    enumerate_neighbors,
    neighbor_pose,
    pose_cell,
    sphere_position,
)

__all__ = [
    "PolicyDecision",
    "PolicyContext",
    "random_policy",
    "brick_policy",
    "bfs_policy",
    "heuristic_2d",
    "heuristic_3d",
    "info_gain_policy",
    "infogain_viewpoints",
    "useful_unexplored",
    "count_visible",
    "BASE_POLICIES",
]


@dataclass(frozen=True)
class PolicyDecision:
    """Where to go next and what it costs in budget steps."""

    target: SphericalPose
    step_cost: int = 1
    direction: Direction | None = None
    info: dict = field(default_factory=dict)


@dataclass
class PolicyContext:
    """Runtime wiring a policy may need beyond the observable state."""

    cfg: RunConfig
    center: np.ndarray
    rng: np.random.Generator | None = None
    sim: GraspSimulator | None = None


def random_policy(state: ExplorationState, ctx: PolicyContext) -> PolicyDecision:
    """Uniformly random valid move."""
    if ctx.rng is None:
        raise ValueError("random policy needs an rng")
    options = enumerate_neighbors(state.pose, ctx.cfg.viewsphere)
    d, pose = options[int(ctx.rng.integers(len(options)))]
    return PolicyDecision(pose, 1, d)


_BRICK_ORDER = (
    Direction.NE, Direction.E, Direction.SE, Direction.S,
    Direction.SW, Direction.W, Direction.NW, Direction.N,
)


def brick_policy(state: ExplorationState, ctx: PolicyContext) -> PolicyDecision:
    """Fixed sweep: always northeast, else the next clockwise direction that fits."""
    for d in _BRICK_ORDER:
        pose = neighbor_pose(state.pose, d, ctx.cfg.viewsphere)
        if pose is not None:
            return PolicyDecision(pose, 1, d)
    raise RuntimeError("no valid move from pose")  # unreachable with sane bounds


def _plan_bfs(state: ExplorationState, ctx: PolicyContext) -> tuple[SphericalPose, ...] | None:
    """Shortest extension of the visited set that produces a grasp.

    Breadth-first over (endpoint, visited-cell-set) states in canonical
    direction order, so the first hit is both minimal in length and
    deterministic among equals. Grasp checks per distinct view set are
    memoized inside the simulator, which keeps re-planning cheap.
    """
    sim = ctx.sim
    if sim is None:
        raise ValueError("bfs policy needs the simulator for lookahead")
    start = state.visited[0]
    base_cells = frozenset(pose_cell(p) for p in state.visited)
    depth_limit = min(ctx.cfg.policy.bfs_max_depth, ctx.cfg.episode.max_steps - state.steps_used)
    budget = ctx.cfg.policy.bfs_node_budget

    queue: deque[tuple[SphericalPose, tuple[SphericalPose, ...], frozenset]] = deque()
    queue.append((state.pose, (), base_cells))
    seen = {(pose_cell(state.pose), base_cells)}
    expanded = 0
    while queue:
        pose, ext, cells = queue.popleft()
        if len(ext) >= depth_limit:
            continue
        for d in DIRECTION_ORDER:
            nxt = neighbor_pose(pose, d, ctx.cfg.viewsphere)
            if nxt is None:
                continue
            ncells = cells | {pose_cell(nxt)}
            key = (pose_cell(nxt), ncells)
            if key in seen:
                continue
            seen.add(key)
            new_ext = ext + (nxt,)
            if sim.best_grasp(start, state.visited + new_ext) is not None:
                return new_ext
            expanded += 1
            if expanded >= budget:
                return None
            queue.append((nxt, new_ext, ncells))
    return None


def bfs_policy(state: ExplorationState, ctx: PolicyContext) -> PolicyDecision:
    """First move of the shortest grasp-reaching path, by exhaustive lookahead."""
    plan = _plan_bfs(state, ctx)
    if plan:
        return PolicyDecision(plan[0], 1, None, info={"plan_len": len(plan)})
    # Search inconclusive within the horizon or node budget: move like the
    # surface-coverage heuristic and re-plan from the richer model next step.
    fallback = heuristic_3d(state, ctx)
    return PolicyDecision(
        fallback.target, fallback.step_cost, fallback.direction, info={"plan_len": 0}
    )


def _disk_structure(radius_px: int) -> np.ndarray:
    if radius_px <= 0:
        return np.ones((1, 1), dtype=bool)
    y, x = np.ogrid[-radius_px : radius_px + 1, -radius_px : radius_px + 1]
    return x * x + y * y <= radius_px * radius_px


def _binary_footprint(points, R, t, intr, dilate_px) -> np.ndarray:
    mask = np.zeros((intr.height, intr.width), dtype=bool)
    if len(points) == 0:
        return mask
    u, v, z = project_points(points, R, t, intr)
    ok = (z > 0) & (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
    mask[v[ok].astype(int), u[ok].astype(int)] = True
    if dilate_px > 0:
        mask = ndimage.binary_dilation(mask, structure=_disk_structure(dilate_px))
    return mask


def heuristic_2d(state: ExplorationState, ctx: PolicyContext) -> PolicyDecision:
    """Pick the neighbor whose virtual image shows the most unexplored area.

    For each reachable pose, the current unexplored cloud and object cloud
    are projected into that camera as binary masks; the score is the count
    of unexplored pixels not covered by the (safety-dilated) object. No new
    rendering happens, only reprojection of what is already known.
    """
    cfg = ctx.cfg
    unexp = state.model.unexplored.unexplored_points()
    obj = state.model.object_points
    best: tuple[int, Direction, SphericalPose] | None = None
    for d, pose in enumerate_neighbors(state.pose, cfg.viewsphere):
        R, t = camera_extrinsics(pose, cfg.viewsphere, ctx.center)
        um = _binary_footprint(unexp, R, t, cfg.intrinsics, cfg.policy.unexplored_dilate_px)
        om = _binary_footprint(obj, R, t, cfg.intrinsics, cfg.policy.object_dilate_px)
        score = int(np.count_nonzero(um & ~om))
        if best is None or score > best[0]:
            best = (score, d, pose)
    assert best is not None
    return PolicyDecision(best[2], 1, best[1], info={"score": float(best[0])})


def useful_unexplored(model: SceneModel, cfg: RunConfig) -> np.ndarray:
    """Unexplored points a gripper finger could actually need to pass through.

    A point is useful when some observed surface point lies within the
    gripper opening of it and the segment between them runs along that
    surface's normal to within the antipodal tolerance cone. Everything
    else is unknown space no grasp would consult.
    """
    unexp = model.unexplored.unexplored_points()
    obj = model.object_points
    if len(unexp) == 0 or len(obj) < 3:
        return np.zeros((0, 3))
    normals, _ = estimate_normals(obj, cfg.grasp.normal_k)
    cap = cfg.policy.h3d_contact_cap
    stride = int(math.ceil(len(obj) / cap)) if len(obj) > cap else 1
    contacts = obj[::stride]
    cnormals = normals[::stride]

    tree = cKDTree(unexp)
    groups = tree.query_ball_point(contacts, cfg.gripper.max_opening_m)
    counts = np.fromiter((len(g) for g in groups), dtype=int, count=len(groups))
    if counts.sum() == 0:
        return np.zeros((0, 3))
    flat = np.concatenate([np.asarray(g, dtype=int) for g in groups if g])
    owner = np.repeat(np.arange(len(contacts)), counts)
    d = unexp[flat] - contacts[owner]
    dist = np.linalg.norm(d, axis=1)
    ok = dist > 1e-9
    cosang = np.zeros(len(d))
    cosang[ok] = np.abs(np.einsum("ki,ki->k", d[ok], cnormals[owner[ok]])) / dist[ok]
    within = cosang >= math.cos(math.radians(cfg.policy.cone_half_angle_deg))
    useful_idx = np.unique(flat[within])
    return unexp[useful_idx]


def count_visible(
    targets: np.ndarray,
    cam_pos: np.ndarray,
    occluder_pts: np.ndarray,
    occluder_normals: np.ndarray,
    disk_radius_m: float,
    chunk: int = 1024,
) -> int:
    """Number of target points with a clear line of sight from a camera.

    The observed surface is locally reconstructed as a disk of the given
    radius in each point's tangent plane; a target is visible when the ray
    from the camera reaches it without crossing any disk. Works on scalar
    (target x occluder) matrices only, chunked over targets to bound memory.
    """
    if len(targets) == 0:
        return 0
    if len(occluder_pts) == 0:
        return len(targets)
    c = np.asarray(cam_pos, dtype=float)
    co = c - occluder_pts  # (O,3)
    a = np.einsum("oi,oi->o", co, co)
    num = -np.einsum("oi,oi->o", co, occluder_normals)  # (o-c).n per occluder
    r2max = disk_radius_m * disk_radius_m
    visible = 0
    for s in range(0, len(targets), chunk):
        rays = targets[s : s + chunk] - c  # unnormalized so t=1 is the target
        denom = rays @ occluder_normals.T  # (T,O)
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = num[None, :] / denom
        # |c + t*ray - o|^2 expanded to scalar terms
        b = rays @ co.T
        rr = np.einsum("ti,ti->t", rays, rays)
        r2 = a[None, :] + 2.0 * tt * b + (tt * tt) * rr[:, None]
        blocked = (tt > 1e-6) & (tt < 1.0 - 1e-6) & (r2 <= r2max)
        visible += int(np.count_nonzero(~blocked.any(axis=1)))
    return visible


def _subsample(points: np.ndarray, cap: int) -> np.ndarray:
    if len(points) <= cap:
        return points
    stride = int(math.ceil(len(points) / cap))
    return points[::stride]


def heuristic_3d(state: ExplorationState, ctx: PolicyContext) -> PolicyDecision:
    """Move toward the view that reveals the most grasp-relevant hidden space.

    Scores each one-step neighbor by how many useful unexplored points it
    would see past the current surface model. When even the best view
    reveals too few points the step size is doubled for this decision,
    trading budget for reach.
    """
    cfg = ctx.cfg
    useful = useful_unexplored(state.model, cfg)
    useful = _subsample(useful, cfg.policy.h3d_useful_cap)
    obj = state.model.object_points
    occ = _subsample(obj, cfg.policy.occluder_cap)
    if len(occ) >= 3:
        occ_normals, _ = estimate_normals(occ, cfg.grasp.normal_k)
    else:
        occ_normals = np.zeros((len(occ), 3))
    disk_r = cfg.policy.occluder_disk_scale * cfg.cloud.voxel_size_m

    def best_for(steps: int):
        best = None
        for d, pose in enumerate_neighbors(state.pose, cfg.viewsphere, steps):
            cam = sphere_position(pose, cfg.viewsphere, ctx.center)
            n = count_visible(useful, cam, occ, occ_normals, disk_r)
            if best is None or n > best[0]:
                best = (n, d, pose)
        return best

    one = best_for(1)
    assert one is not None
    if one[0] > cfg.policy.points_threshold or state.steps_used + 2 > cfg.episode.max_steps:
        return PolicyDecision(one[2], 1, one[1], info={"visible": float(one[0]), "doubled": 0.0})
    two = best_for(2)
    if two is None:
        return PolicyDecision(one[2], 1, one[1], info={"visible": float(one[0]), "doubled": 0.0})
    return PolicyDecision(two[2], 2, two[1], info={"visible": float(two[0]), "doubled": 1.0})


def infogain_viewpoints(polar_top_deg: float = 10.0) -> tuple[SphericalPose, ...]:
    """Fixed global candidate set: one top-down view plus three azimuth rings."""
    poses = [SphericalPose(polar_top_deg, 0.0)]
    for polar, count in ((25.0, 8), (50.0, 12), (75.0, 13)):
        for j in range(count):
            poses.append(SphericalPose(polar, j * 360.0 / count))
    return tuple(poses)


def info_gain_policy(state: ExplorationState, ctx: PolicyContext) -> PolicyDecision:
    """Classic global view planning: fly to the candidate viewpoint, anywhere
    on the sphere, that would see the most unexplored points.

    Unlike the local heuristics this scores all unexplored space (no grasp
    relevance filter) over a fixed set of 34 viewpoints, and it pays travel
    accordingly: the step cost is the arc length in units of one lattice step.
    """
    cfg = ctx.cfg
    unexp = _subsample(state.model.unexplored.unexplored_points(), cfg.policy.infogain_point_cap)
    obj = state.model.object_points
    occ = _subsample(obj, cfg.policy.occluder_cap)
    if len(occ) >= 3:
        occ_normals, _ = estimate_normals(occ, cfg.grasp.normal_k)
    else:
        occ_normals = np.zeros((len(occ), 3))
    disk_r = cfg.policy.occluder_disk_scale * cfg.cloud.voxel_size_m

    here = pose_cell(state.pose)
    best: tuple[int, int, SphericalPose] | None = None
    for idx, pose in enumerate(infogain_viewpoints(cfg.viewsphere.polar_min_deg)):
        if pose_cell(pose) == here:
            continue
        cam = sphere_position(pose, cfg.viewsphere, ctx.center)
        n = count_visible(unexp, cam, occ, occ_normals, disk_r)
        if best is None or n > best[0]:
            best = (n, idx, pose)
    assert best is not None
    step_arc = cfg.viewsphere.radius_m * math.radians(cfg.viewsphere.step_deg)
    arc = arc_distance(state.pose, best[2], cfg.viewsphere)
    cost = max(1, int(math.ceil(arc / step_arc - 1e-9)))
    return PolicyDecision(best[2], cost, None, info={"visible": float(best[0])})


BASE_POLICIES = {
    "random": random_policy,
    "brick": brick_policy,
    "bfs": bfs_policy,
    "h2d": heuristic_2d,
    "h3d": heuristic_3d,
    "infogain": info_gain_policy,
}
