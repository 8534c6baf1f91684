"""Compact scene features for learned policies.

The scene is summarized by two small height maps over a fixed square patch
of the table, one for the observed object surface and one for the
still-unexplored volume, plus the camera's spherical coordinates. This is
deliberately lossy; the point is a fixed-length vector a small model can
digest.
"""
from __future__ import annotations

import numpy as np

from ..cloud import SceneModel
from ..viewsphere import SphericalPose

__all__ = ["height_map", "state_vector", "STATE_DIM_FN"]


def STATE_DIM_FN(n: int) -> int:
    """Length of the state vector for an n x n height-map grid."""
    return 2 * n * n + 2


def height_map(points: np.ndarray, n: int, region_m: float) -> np.ndarray:
    """Max-height image of a cloud over a centered square region.

    Cells with no points read 0. Points outside the region are ignored.
    """
    grid = np.zeros((n, n))
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        return grid
    half = region_m / 2.0
    cell = region_m / n
    inside = (
        (pts[:, 0] >= -half) & (pts[:, 0] < half) & (pts[:, 1] >= -half) & (pts[:, 1] < half)
    )
    pts = pts[inside]
    if len(pts) == 0:
        return grid
    ix = np.floor((pts[:, 0] + half) / cell).astype(int)
    iy = np.floor((pts[:, 1] + half) / cell).astype(int)
    np.maximum.at(grid, (ix, iy), pts[:, 2])
    return grid


def state_vector(model: SceneModel, pose: SphericalPose, n: int, region_m: float) -> np.ndarray:
    """[object height map, unexplored height map, polar, azimuth]."""
    obj = height_map(model.object_points, n, region_m)
    unexp = height_map(model.unexplored.unexplored_points(), n, region_m)
    return np.concatenate(
        [obj.ravel(), unexp.ravel(), [pose.polar_deg, pose.azimuth_deg % 360.0]]
    )
