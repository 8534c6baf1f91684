"""Antipodal grasp synthesis on partial point clouds.

Candidates are pairs of surface contacts whose normals are close to
antiparallel along the line joining them. A candidate survives only if both
contacts sit on flat, well-supported patches and the closing fingers sweep
through space that is known to be free: any overlap with still-unexplored
volume or with observed object surface vetoes the grasp. That veto is what
couples grasping to exploration; a grasp that "looks" perfect behind an
unseen wall is rejected until a view clears the space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cloud import SceneModel, _pack_rows

__all__ = [
    "GripperModel",
    "GraspParams",
    "GraspCandidate",
    "estimate_normals",
    "contact_patch_area",
    "pair_quality_deg",
    "gravity_misalignment_deg",
    "grasp_collides",
    "synthesize_grasps",
    "select_best_grasp",
]


@dataclass(frozen=True)
class GripperModel:
    """Parallel-jaw gripper abstraction used by the planner."""

    max_opening_m: float = 0.08
    finger_radius_m: float = 0.012
    min_patch_area_m2: float = 2e-4
    max_curvature: float = 0.03
    approach_clearance_m: float = 0.02


@dataclass(frozen=True)
class GraspParams:
    """Tunables of the synthesis pipeline."""

    quality_min_deg: float = 150.0
    gravity_weight: float = 0.5
    normal_k: int = 16
    patch_cell_m: float = 0.0045
    patch_slab_m: float = 0.006
    pair_bin_m: float = 0.01
    min_pair_separation_m: float = 0.01
    finger_gap_m: float = 0.005


@dataclass(frozen=True)
class GraspCandidate:
    """A scored antipodal contact pair. axis points from a to b."""

    point_a: np.ndarray
    point_b: np.ndarray
    normal_a: np.ndarray
    normal_b: np.ndarray
    quality_deg: float
    width_m: float
    score: float

    @property
    def axis(self) -> np.ndarray:
        u = self.point_b - self.point_a
        return u / np.linalg.norm(u)


def estimate_normals(points: np.ndarray, k: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Per-point normals and curvature from local covariance.

    Curvature is the surface-variation ratio lambda0/(lambda0+lambda1+lambda2)
    of the local covariance eigenvalues; 0 on a plane, up to 1/3 for fully
    scattered neighborhoods. Normals are oriented away from the cloud
    centroid, which is only a convention; downstream uses are sign-agnostic.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n == 0:
        return np.zeros((0, 3)), np.zeros(0)
    k = min(k, n)
    tree = cKDTree(pts)
    _, idx = tree.query(pts, k=k)
    if k == 1:
        idx = idx[:, None]
    nbrs = pts[idx]  # (n, k, 3)
    mean = nbrs.mean(axis=1, keepdims=True)
    d = nbrs - mean
    cov = np.einsum("nki,nkj->nij", d, d) / k
    w, v = np.linalg.eigh(cov)  # ascending eigenvalues
    normals = v[:, :, 0]
    tot = w.sum(axis=1)
    curv = np.where(tot > 1e-18, w[:, 0] / np.where(tot > 1e-18, tot, 1.0), 0.0)
    centroid = pts.mean(axis=0)
    flip = np.einsum("ni,ni->n", normals, pts - centroid) < 0
    normals[flip] *= -1.0
    return normals, curv


def _tangent_frames(normals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal in-plane bases (e1, e2) for an array of unit normals."""
    z = np.array([0.0, 0.0, 1.0])
    e1 = np.cross(normals, z)
    n1 = np.linalg.norm(e1, axis=1)
    bad = n1 < 1e-6
    if np.any(bad):
        e1[bad] = np.cross(normals[bad], np.array([1.0, 0.0, 0.0]))
        n1 = np.linalg.norm(e1, axis=1)
    e1 = e1 / n1[:, None]
    e2 = np.cross(normals, e1)
    return e1, e2


def contact_patch_area(
    points: np.ndarray,
    contact: np.ndarray,
    normal: np.ndarray,
    radius_m: float,
    cell_m: float,
    slab_m: float,
    tree: cKDTree | None = None,
) -> float:
    """Supported area around a contact, in m^2.

    Neighbors within `radius_m` of the contact and within `slab_m` of its
    tangent plane are flattened onto that plane and rasterized at `cell_m`;
    the area is the count of occupied cells times the cell area. This
    underestimates a full disk slightly and collapses to near zero when the
    contact sits on an edge or a sliver of surface.
    """
    pts = np.asarray(points, dtype=float)
    if tree is None:
        tree = cKDTree(pts)
    idx = tree.query_ball_point(contact, radius_m)
    if not idx:
        return 0.0
    d = pts[idx] - contact
    h = d @ normal
    d = d[np.abs(h) <= slab_m]
    if len(d) == 0:
        return 0.0
    e1, e2 = _tangent_frames(np.asarray(normal, dtype=float)[None, :])
    uv = np.column_stack([d @ e1[0], d @ e2[0]])
    cells = np.unique(np.floor(uv / cell_m).astype(np.int64), axis=0)
    return len(cells) * cell_m * cell_m


def _patch_areas(
    pts: np.ndarray,
    idx: np.ndarray,
    normals: np.ndarray,
    radius_m: float,
    cell_m: float,
    slab_m: float,
    tree: cKDTree,
) -> np.ndarray:
    """contact_patch_area for many cloud points at once (same semantics)."""
    m = len(idx)
    if m == 0:
        return np.zeros(0)
    centers = pts[idx]
    nrm = normals[idx]
    groups = tree.query_ball_point(centers, radius_m)
    counts = np.fromiter((len(g) for g in groups), dtype=np.int64, count=m)
    if counts.sum() == 0:
        return np.zeros(m)
    nb = np.concatenate([np.asarray(g, dtype=np.int64) for g in groups if len(g)])
    owner = np.repeat(np.arange(m), counts)
    d = pts[nb] - centers[owner]
    h = np.einsum("ki,ki->k", d, nrm[owner])
    keep = np.abs(h) <= slab_m
    d, owner = d[keep], owner[keep]
    e1, e2 = _tangent_frames(nrm)
    cu = np.floor(np.einsum("ki,ki->k", d, e1[owner]) / cell_m).astype(np.int64)
    cv = np.floor(np.einsum("ki,ki->k", d, e2[owner]) / cell_m).astype(np.int64)
    rows = np.stack([owner, cu, cv], axis=1)
    packed = _pack_rows(rows)
    if packed is None:
        uniq_owner = np.unique(rows, axis=0)[:, 0]
    else:
        _, first = np.unique(packed, return_index=True)
        uniq_owner = owner[first]
    per = np.bincount(uniq_owner, minlength=m)
    return per.astype(float) * cell_m * cell_m


def pair_quality_deg(a, b, normal_a, normal_b) -> float:
    """Antipodality score in degrees, 180 for perfectly opposed contacts.

    Both normals are compared (sign-agnostically) against the contact axis;
    the score drops by the sum of the two misalignment angles.
    """
    u = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    n = np.linalg.norm(u)
    if n < 1e-12:
        return 0.0
    u = u / n
    ca = min(1.0, abs(float(np.dot(normal_a, u))))
    cb = min(1.0, abs(float(np.dot(normal_b, u))))
    q = 180.0 - math.degrees(math.acos(ca)) - math.degrees(math.acos(cb))
    return max(0.0, q)


def gravity_misalignment_deg(axis: np.ndarray) -> float:
    """Angle of the grasp axis out of the horizontal plane, in [0, 90].

    A horizontal axis closes against gravity torque best, so 0 is ideal.
    """
    u = np.asarray(axis, dtype=float)
    u = u / np.linalg.norm(u)
    return math.degrees(math.asin(min(1.0, abs(float(u[2])))))


def _finger_frames(a, b, gripper: GripperModel, params: GraspParams):
    """Oriented boxes swept by the two fingers just outside the contacts."""
    u = b - a
    u = u / np.linalg.norm(u)
    ref = np.array([0.0, 0.0, 1.0]) if abs(u[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(ref, u)
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(u, e1)
    half_len = gripper.approach_clearance_m / 2.0
    r = gripper.finger_radius_m
    boxes = []
    for contact, outward in ((a, -u), (b, u)):
        center = contact + outward * (params.finger_gap_m + half_len)
        axes = np.column_stack([e1, e2, outward])
        boxes.append((center, axes, np.array([r, r, half_len])))
    return boxes


def _collision_mask(
    pa: np.ndarray,
    pb: np.ndarray,
    gripper: GripperModel,
    params: GraspParams,
    obstacle_tree: cKDTree,
    obstacles: np.ndarray,
) -> np.ndarray:
    """Per-candidate finger collision flags, evaluated as one batch.

    Both finger boxes of every candidate are tested against all obstacle
    points inside their bounding spheres; any point strictly inside a box
    vetoes that candidate.
    """
    k = len(pa)
    if k == 0:
        return np.zeros(0, dtype=bool)
    u = pb - pa
    u = u / np.linalg.norm(u, axis=1, keepdims=True)
    ref = np.where(np.abs(u[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
    e1 = np.cross(ref, u)
    e1 = e1 / np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(u, e1)
    half_len = gripper.approach_clearance_m / 2.0
    r = gripper.finger_radius_m
    half = np.array([r, r, half_len])
    offset = params.finger_gap_m + half_len

    centers = np.vstack([pa - u * offset, pb + u * offset])  # (2K,3)
    out_axis = np.vstack([-u, u])
    e1e = np.vstack([e1, e1])
    e2e = np.vstack([e2, e2])
    bound = float(np.linalg.norm(half))
    groups = obstacle_tree.query_ball_point(centers, bound)
    counts = np.fromiter((len(g) for g in groups), dtype=np.int64, count=2 * k)
    hit = np.zeros(k, dtype=bool)
    if counts.sum() == 0:
        return hit
    nb = np.concatenate([np.asarray(g, dtype=np.int64) for g in groups if len(g)])
    owner = np.repeat(np.arange(2 * k), counts)
    d = obstacles[nb] - centers[owner]
    l1 = np.abs(np.einsum("ki,ki->k", d, e1e[owner])) <= half[0]
    l2 = np.abs(np.einsum("ki,ki->k", d, e2e[owner])) <= half[1]
    l3 = np.abs(np.einsum("ki,ki->k", d, out_axis[owner])) <= half[2]
    inside = l1 & l2 & l3
    bad_owner = np.unique(owner[inside])
    hit[bad_owner % k] = True
    return hit


def grasp_collides(
    a: np.ndarray,
    b: np.ndarray,
    model: SceneModel,
    gripper: GripperModel,
    params: GraspParams,
    obstacle_tree: cKDTree | None = None,
    obstacles: np.ndarray | None = None,
) -> bool:
    """True when a finger volume overlaps unexplored space or known surface."""
    if obstacles is None:
        parts = [model.unexplored.unexplored_points(), model.object_points]
        parts = [p for p in parts if len(p)]
        if not parts:
            return False
        obstacles = np.vstack(parts)
        obstacle_tree = cKDTree(obstacles)
    assert obstacle_tree is not None
    mask = _collision_mask(
        np.asarray(a, float)[None, :],
        np.asarray(b, float)[None, :],
        gripper,
        params,
        obstacle_tree,
        obstacles,
    )
    return bool(mask[0])


def _scored_pairs(model: SceneModel, gripper: GripperModel, params: GraspParams):
    """Deduplicated candidate pairs sorted by descending selection score.

    Returns (points, index pairs (K,2), quality (K,), score (K,), normals).
    """
    pts = model.object_points
    if len(pts) < 3:
        return pts, np.zeros((0, 2), dtype=int), np.zeros(0), np.zeros(0), np.zeros((0, 3))
    normals, curv = estimate_normals(pts, params.normal_k)
    tree = cKDTree(pts)

    flat = np.flatnonzero(curv <= gripper.max_curvature)
    areas = _patch_areas(
        pts, flat, normals, gripper.finger_radius_m,
        params.patch_cell_m, params.patch_slab_m, tree,
    )
    good = flat[areas >= gripper.min_patch_area_m2]
    if len(good) < 2:
        return pts, np.zeros((0, 2), dtype=int), np.zeros(0), np.zeros(0), normals

    ctree = cKDTree(pts[good])
    raw = ctree.query_pairs(gripper.max_opening_m, output_type="ndarray")
    if len(raw) == 0:
        return pts, np.zeros((0, 2), dtype=int), np.zeros(0), np.zeros(0), normals
    ii = good[raw[:, 0]]
    jj = good[raw[:, 1]]
    u = pts[jj] - pts[ii]
    # Cheap necessary conditions first: enumerating pairs is quadratic, and
    # on featureless partial models almost none survive the quality cone, so
    # the exact trig below must only ever see the short list. A pair can
    # reach quality_min only if each normal is within the full misalignment
    # budget of the axis, which needs no square roots or arccos to test.
    w2 = np.einsum("ki,ki->k", u, u)
    da = np.einsum("ki,ki->k", normals[ii], u)
    db = np.einsum("ki,ki->k", normals[jj], u)
    cone_cos2 = math.cos(math.radians(180.0 - params.quality_min_deg)) ** 2
    keep = (
        (w2 >= params.min_pair_separation_m**2)
        & (da * da >= cone_cos2 * w2)
        & (db * db >= cone_cos2 * w2)
    )
    ii, jj, u = ii[keep], jj[keep], u[keep]
    if len(ii) == 0:
        return pts, np.zeros((0, 2), dtype=int), np.zeros(0), np.zeros(0), normals
    widths = np.linalg.norm(u, axis=1)
    uhat = u / widths[:, None]
    ca = np.clip(np.abs(np.einsum("ki,ki->k", normals[ii], uhat)), 0.0, 1.0)
    cb = np.clip(np.abs(np.einsum("ki,ki->k", normals[jj], uhat)), 0.0, 1.0)
    quality = 180.0 - np.degrees(np.arccos(ca)) - np.degrees(np.arccos(cb))
    keep = quality >= params.quality_min_deg
    ii, jj, uhat, widths, quality = ii[keep], jj[keep], uhat[keep], widths[keep], quality[keep]
    if len(ii) == 0:
        return pts, np.zeros((0, 2), dtype=int), np.zeros(0), np.zeros(0), normals

    tilt = np.degrees(np.arcsin(np.clip(np.abs(uhat[:, 2]), 0.0, 1.0)))
    score = quality - params.gravity_weight * tilt
    order = np.argsort(-score, kind="stable")

    # One candidate per unordered coarse (cell_a, cell_b) bin, keeping the
    # best score. Packed scalar keys make the dedup a single stable unique.
    cells_a = np.floor(pts[ii] / params.pair_bin_m).astype(np.int64)
    cells_b = np.floor(pts[jj] / params.pair_bin_m).astype(np.int64)
    packed = _pack_rows(np.vstack([cells_a, cells_b]))
    if packed is not None and int(packed.max(initial=0)) < 2**31:
        ka, kb = packed[: len(ii)], packed[len(ii) :]
        key = np.minimum(ka, kb) * (int(packed.max(initial=0)) + 1) + np.maximum(ka, kb)
        _, first = np.unique(key[order], return_index=True)
        sel = order[np.sort(first)]
    else:
        seen: set[tuple] = set()
        picks = []
        for k in order:
            ta, tb = tuple(cells_a[k]), tuple(cells_b[k])
            pair_key = (ta, tb) if ta <= tb else (tb, ta)
            if pair_key in seen:
                continue
            seen.add(pair_key)
            picks.append(k)
        sel = np.array(picks, dtype=int)
    pairs = np.column_stack([ii[sel], jj[sel]])
    return pts, pairs, quality[sel], score[sel], normals


def _iter_collision_free(model: SceneModel, gripper: GripperModel, params: GraspParams):
    pts, pairs, quality, score, normals = _scored_pairs(model, gripper, params)
    if len(pairs) == 0:
        return
    parts = [model.unexplored.unexplored_points(), model.object_points]
    parts = [p for p in parts if len(p)]
    obstacles = np.vstack(parts)
    obstacle_tree = cKDTree(obstacles)
    # Chunked so callers that only want the best candidate stop early.
    chunk = 128
    for s in range(0, len(pairs), chunk):
        sel = pairs[s : s + chunk]
        colliding = _collision_mask(
            pts[sel[:, 0]], pts[sel[:, 1]], gripper, params, obstacle_tree, obstacles
        )
        for off in np.flatnonzero(~colliding):
            k = s + int(off)
            i, j = pairs[k]
            yield GraspCandidate(
                point_a=pts[i].copy(),
                point_b=pts[j].copy(),
                normal_a=normals[i].copy(),
                normal_b=normals[j].copy(),
                quality_deg=float(quality[k]),
                width_m=float(np.linalg.norm(pts[j] - pts[i])),
                score=float(score[k]),
            )


def synthesize_grasps(
    model: SceneModel, gripper: GripperModel, params: GraspParams, limit: int | None = None
) -> list[GraspCandidate]:
    """All collision-free candidates, best score first (optionally capped)."""
    out = []
    for cand in _iter_collision_free(model, gripper, params):
        out.append(cand)
        if limit is not None and len(out) >= limit:
            break
    return out


def select_best_grasp(
    model: SceneModel, gripper: GripperModel, params: GraspParams
) -> GraspCandidate | None:
    """Highest-scoring collision-free grasp, or None when nothing survives."""
    for cand in _iter_collision_free(model, gripper, params):
        return cand
    return None
