"""Point-cloud processing: fusion, table removal, and unexplored-space tracking.

The unexplored grid is the core bookkeeping structure for view planning: an
evenly spaced lattice around the object where each cell is either still
unobserved or has been cleared by some depth image. Clearing is monotone;
once a cell is explored it never reverts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .scene import DepthImage, project_points

__all__ = [
    "voxel_downsample",
    "fuse_clouds",
    "segment_table",
    "UnexploredGrid",
    "init_unexplored",
    "update_unexplored",
    "SceneModel",
]


def _pack_rows(rows: np.ndarray) -> np.ndarray | None:
    """Pack integer rows into scalar int64 keys, or None if they cannot fit.

    The packing is bijective over the observed value ranges and preserves
    lexicographic row order, so a 1-d unique/sort over the keys is exactly
    equivalent to (much slower) row-wise operations on the original array.
    """
    if rows.size == 0:
        return np.zeros(0, dtype=np.int64)
    lo = rows.min(axis=0)
    span = (rows.max(axis=0) - lo + 1).tolist()
    total = 1
    for s in span:
        total *= int(s)
        if total > 2**62:
            return None
    key = np.zeros(len(rows), dtype=np.int64)
    for j, s in enumerate(span):
        key = key * int(s) + (rows[:, j] - lo[j])
    return key


def voxel_downsample(points: np.ndarray, voxel_size: float) -> np.ndarray:
    """Reduce a cloud to one centroid per occupied voxel.

    Output order follows sorted voxel index, so the result is deterministic
    for any input ordering.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        return pts.reshape(0, 3)
    keys = np.floor(pts / voxel_size).astype(np.int64)
    packed = _pack_rows(keys)
    if packed is None:
        _, inv = np.unique(keys, axis=0, return_inverse=True)
    else:
        _, inv = np.unique(packed, return_inverse=True)
    n_vox = int(inv.max()) + 1
    sums = np.zeros((n_vox, 3))
    np.add.at(sums, inv, pts)
    counts = np.bincount(inv, minlength=n_vox).astype(float)
    return sums / counts[:, None]


def fuse_clouds(clouds, voxel_size: float) -> np.ndarray:
    """Merge several clouds and re-downsample the union."""
    stacks = [np.asarray(c, dtype=float).reshape(-1, 3) for c in clouds if len(c)]
    if not stacks:
        return np.zeros((0, 3))
    return voxel_downsample(np.vstack(stacks), voxel_size)


def segment_table(
    points: np.ndarray,
    dist_threshold_m: float = 0.005,
    iterations: int = 500,
    min_inlier_frac: float = 0.30,
    clearance_m: float = 0.008,
) -> tuple[np.ndarray, np.ndarray]:
    """Split a cloud into (object, table) via RANSAC plane fitting.

    The dominant plane must claim at least `min_inlier_frac` of the points;
    otherwise the view is assumed to contain no table and everything is
    returned as object. Object points must clear the plane by `clearance_m`
    on its upper side; the sliver between the plane band and the clearance
    is dropped as ambiguous.

    Uses a fixed internal seed so the split is a pure function of its inputs.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n < 3:
        return pts.reshape(-1, 3), np.zeros((0, 3))
    rng = np.random.default_rng(1486)
    trip = rng.integers(0, n, size=(iterations, 3))
    p0, p1, p2 = pts[trip[:, 0]], pts[trip[:, 1]], pts[trip[:, 2]]
    normals = np.cross(p1 - p0, p2 - p0)
    norms = np.linalg.norm(normals, axis=1)
    ok = norms > 1e-12
    if not np.any(ok):
        return pts, np.zeros((0, 3))
    normals = normals[ok] / norms[ok, None]
    offsets = np.einsum("ij,ij->i", pts[trip[ok, 0]], normals)
    counts = np.zeros(len(normals), dtype=np.int64)
    chunk = 64  # bound the (points x planes) distance matrix
    for s in range(0, len(normals), chunk):
        d = pts @ normals[s : s + chunk].T - offsets[s : s + chunk]
        counts[s : s + chunk] = np.count_nonzero(np.abs(d) <= dist_threshold_m, axis=0)
    best = int(np.argmax(counts))
    if counts[best] < min_inlier_frac * n:
        return pts, np.zeros((0, 3))
    normal, offset = normals[best], float(offsets[best])
    if normal[2] < 0:  # orient the plane normal upward
        normal, offset = -normal, -offset
    d = pts @ normal - offset
    table = pts[np.abs(d) <= dist_threshold_m]
    obj = pts[d >= clearance_m]
    return obj, table


@dataclass(frozen=True)
class UnexploredGrid:
    """Evenly spaced sample points around the object with explored flags."""

    points: np.ndarray
    explored: np.ndarray
    spacing_m: float

    def unexplored_points(self) -> np.ndarray:
        return self.points[~self.explored]

    def unexplored_count(self) -> int:
        return int(np.count_nonzero(~self.explored))


def init_unexplored(
    object_points: np.ndarray, spacing_m: float = 0.01, margin_m: float = 0.08
) -> UnexploredGrid:
    """Seed the grid from a first object observation.

    The grid spans the object bounding box inflated by `margin_m` in x/y
    and above, but never dips below the table plane. Everything starts
    unexplored.
    """
    pts = np.asarray(object_points, dtype=float)
    if len(pts) == 0:
        raise ValueError("cannot initialize unexplored grid from an empty cloud")
    lo = pts.min(axis=0) - margin_m
    hi = pts.max(axis=0) + margin_m
    xs = np.arange(lo[0], hi[0] + spacing_m / 2, spacing_m)
    ys = np.arange(lo[1], hi[1] + spacing_m / 2, spacing_m)
    zs = np.arange(spacing_m / 2.0, hi[2] + spacing_m / 2, spacing_m)
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    return UnexploredGrid(grid, np.zeros(len(grid), dtype=bool), spacing_m)


def _conservative_env_depth(img: DepthImage) -> np.ndarray:
    """Per-pixel nearest depth over a 3x3 neighborhood, inf where no data.

    Taking the neighborhood minimum makes occlusion checks near silhouette
    edges err toward "still hidden", which costs a little extra exploration
    but never clears space the camera did not actually see past.
    """
    d = np.where(img.depth > 0.0, img.depth, np.inf)
    return ndimage.minimum_filter(d, size=3, mode="nearest")


def update_unexplored(
    grid: UnexploredGrid, img: DepthImage, depth_tolerance_m: float, env: np.ndarray | None = None
) -> UnexploredGrid:
    """Clear grid cells that a depth image shows to be observed.

    A cell is cleared when it projects into the image and its camera depth
    does not exceed the environment depth at that pixel by more than the
    tolerance: the camera saw up to (and including) that depth, so the cell
    is either free space or observed surface. Callers that update many grids
    against the same image may pass a precomputed environment depth map.
    """
    pending = ~grid.explored
    pts = grid.points[pending]
    if len(pts) == 0:
        return grid
    u, v, z = project_points(pts, img.R, img.t, img.intrinsics)
    h, w = img.depth.shape
    ui = np.floor(u).astype(int)
    vi = np.floor(v).astype(int)
    inside = (z > 0) & (ui >= 0) & (ui < w) & (vi >= 0) & (vi < h)
    if env is None:
        env = _conservative_env_depth(img)
    seen = np.zeros(len(pts), dtype=bool)
    seen[inside] = z[inside] <= env[vi[inside], ui[inside]] + depth_tolerance_m
    explored = grid.explored.copy()
    explored[np.flatnonzero(pending)[seen]] = True
    return UnexploredGrid(grid.points, explored, grid.spacing_m)


@dataclass(frozen=True)
class SceneModel:
    """Everything the planner knows about the scene at some instant."""

    object_points: np.ndarray
    table_points: np.ndarray
    unexplored: UnexploredGrid
