"""Discretized viewsphere around a tabletop workspace.

An eye-in-hand camera is constrained to a sphere of fixed radius centered
above the workspace. Poses are parameterized by polar angle (from the world
+z axis) and azimuth, and movement happens on a lattice with a fixed angular
step along eight compass directions.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Direction",
    "DIRECTION_ORDER",
    "ViewsphereConfig",
    "SphericalPose",
    "sphere_position",
    "camera_extrinsics",
    "neighbor_pose",
    "enumerate_neighbors",
    "valid_directions",
    "arc_distance",
    "pose_cell",
]


class Direction(enum.IntEnum):
    """Compass directions on the sphere surface, clockwise from north.

    North decreases the polar angle (camera climbs toward the top of the
    sphere), south increases it, east increases azimuth, west decreases it.
    """

    N = 0
    NE = 1
    E = 2
    SE = 3
    S = 4
    SW = 5
    W = 6
    NW = 7


# Canonical iteration order used everywhere a tie has to break deterministically.
DIRECTION_ORDER: tuple[Direction, ...] = tuple(Direction)

# (polar component, azimuth component) per direction, in units of one step.
_DIR_COMPONENTS: dict[Direction, tuple[float, float]] = {
    Direction.N: (-1.0, 0.0),
    Direction.NE: (-1.0, 1.0),
    Direction.E: (0.0, 1.0),
    Direction.SE: (1.0, 1.0),
    Direction.S: (1.0, 0.0),
    Direction.SW: (1.0, -1.0),
    Direction.W: (0.0, -1.0),
    Direction.NW: (-1.0, -1.0),
}


@dataclass(frozen=True)
class ViewsphereConfig:
    """Geometry of the discretized viewsphere."""

    radius_m: float = 0.4
    step_deg: float = 20.0
    polar_min_deg: float = 10.0
    polar_max_deg: float = 85.0

    def __post_init__(self) -> None:
        if self.radius_m <= 0:
            raise ValueError("viewsphere radius must be positive")
        if not 0 < self.step_deg <= 90:
            raise ValueError("step must be in (0, 90] degrees")
        if not 0 <= self.polar_min_deg < self.polar_max_deg <= 90:
            raise ValueError("polar bounds must satisfy 0 <= min < max <= 90")


@dataclass(frozen=True)
class SphericalPose:
    """Camera pose on the sphere: polar angle from +z and azimuth from +x."""

    polar_deg: float
    azimuth_deg: float

    def wrapped(self) -> "SphericalPose":
        return SphericalPose(self.polar_deg, self.azimuth_deg % 360.0)


def sphere_position(pose: SphericalPose, cfg: ViewsphereConfig, center: np.ndarray) -> np.ndarray:
    """World position of the camera for a pose, given the sphere center."""
    th = math.radians(pose.polar_deg)
    az = math.radians(pose.azimuth_deg)
    offset = np.array(
        [
            math.sin(th) * math.cos(az),
            math.sin(th) * math.sin(az),
            math.cos(th),
        ]
    )
    return np.asarray(center, dtype=float) + cfg.radius_m * offset


def camera_extrinsics(
    pose: SphericalPose, cfg: ViewsphereConfig, center: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Camera-to-world rotation and translation for a viewsphere pose.

    The optical (+z) axis points from the camera position through the sphere
    center. Image +x is right and +y is down; the camera is rolled so that
    "up" in the image is the world vertical projected into the image plane.
    Near the poles, where the vertical is parallel to the optical axis, the
    azimuth tangent direction is used instead so the frame stays defined.

    Returns:
        (R, t): 3x3 rotation whose columns are the camera axes in world
        coordinates, and the camera position. World point p maps to camera
        frame as R.T @ (p - t).
    """
    t = sphere_position(pose, cfg, center)
    z_cam = np.asarray(center, dtype=float) - t
    z_cam = z_cam / np.linalg.norm(z_cam)

    world_up = np.array([0.0, 0.0, 1.0])
    up = world_up - np.dot(world_up, z_cam) * z_cam
    n = np.linalg.norm(up)
    if n < 1e-9:
        az = math.radians(pose.azimuth_deg)
        up = np.array([-math.sin(az), math.cos(az), 0.0])
        up = up - np.dot(up, z_cam) * z_cam
        n = np.linalg.norm(up)
    up = up / n

    y_cam = -up
    x_cam = np.cross(y_cam, z_cam)
    x_cam = x_cam / np.linalg.norm(x_cam)
    R = np.column_stack([x_cam, y_cam, z_cam])
    return R, t


def neighbor_pose(
    pose: SphericalPose, direction: Direction, cfg: ViewsphereConfig, steps: int = 1
) -> SphericalPose | None:
    """Lattice neighbor reached by moving `steps` steps in a direction.

    Diagonal moves change both angles by the full step. Azimuth wraps;
    a move whose polar angle leaves the configured band is invalid and
    yields None.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dp, da = _DIR_COMPONENTS[direction]
    polar = pose.polar_deg + dp * cfg.step_deg * steps
    azimuth = (pose.azimuth_deg + da * cfg.step_deg * steps) % 360.0
    if polar < cfg.polar_min_deg - 1e-9 or polar > cfg.polar_max_deg + 1e-9:
        return None
    return SphericalPose(polar, azimuth)


def valid_directions(pose: SphericalPose, cfg: ViewsphereConfig, steps: int = 1) -> list[Direction]:
    """Directions whose target stays inside the workspace, in canonical order."""
    return [d for d in DIRECTION_ORDER if neighbor_pose(pose, d, cfg, steps) is not None]


def enumerate_neighbors(
    pose: SphericalPose, cfg: ViewsphereConfig, steps: int = 1
) -> list[tuple[Direction, SphericalPose]]:
    """(direction, pose) pairs for every valid move, in canonical order."""
    out = []
    for d in DIRECTION_ORDER:
        p = neighbor_pose(pose, d, cfg, steps)
        if p is not None:
            out.append((d, p))
    return out


def arc_distance(a: SphericalPose, b: SphericalPose, cfg: ViewsphereConfig) -> float:
    """Great-circle distance in meters between two poses on the sphere."""
    ta, tb = math.radians(a.polar_deg), math.radians(b.polar_deg)
    da = math.radians(b.azimuth_deg - a.azimuth_deg)
    # Central angle between the two radial unit vectors.
    cosg = math.cos(ta) * math.cos(tb) + math.sin(ta) * math.sin(tb) * math.cos(da)
    cosg = min(1.0, max(-1.0, cosg))
    return cfg.radius_m * math.acos(cosg)


def pose_cell(pose: SphericalPose) -> tuple[int, int]:
    """Integer lattice key for a pose, stable under float step arithmetic."""
    return (round(pose.polar_deg * 1000.0), round(pose.azimuth_deg % 360.0 * 1000.0))
