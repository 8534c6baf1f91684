"""Tabletop scene and simulated depth camera.

Rendering follows the pinhole model: a pixel (u, v) corresponds to the
camera-frame ray direction ((u-ppx)/fx, (v-ppy)/fy, 1). Because the z
component is 1, the ray parameter at an intersection equals the z depth,
which is what a depth camera reports. Projection of a point X with depth z
is u = fx*x/z + ppx, v = fy*y/z + ppy.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .meshes import Mesh
from .viewsphere import SphericalPose, ViewsphereConfig, camera_extrinsics

__all__ = [
    "CameraIntrinsics",
    "DepthImage",
    "TriangleBVH",
    "TabletopScene",
    "build_scene",
    "render_depth",
    "render_depth_exhaustive",
    "depth_to_cloud",
    "project_points",
]

_EPS = 1e-12


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float = 300.0
    fy: float = 300.0
    ppx: float = 160.0
    ppy: float = 120.0
    width: int = 320
    height: int = 240

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.ppx], [0.0, self.fy, self.ppy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class DepthImage:
    """Depth map plus the camera that produced it.

    depth: (H,W) float64, z depth in meters, 0.0 where nothing was hit.
    R, t: camera-to-world rotation (columns = camera axes) and position.
    """

    depth: np.ndarray
    intrinsics: CameraIntrinsics
    pose: SphericalPose
    R: np.ndarray
    t: np.ndarray

    def valid_mask(self) -> np.ndarray:
        return self.depth > 0.0


def project_points(
    points: np.ndarray, R: np.ndarray, t: np.ndarray, intr: CameraIntrinsics
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project world points into a camera. Returns (u, v, z) float arrays.

    Points behind the camera get z <= 0; callers must mask on that.
    """
    p = (np.asarray(points, dtype=float) - t) @ R  # R.T @ (x - t), batched
    z = p[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * p[:, 0] / z + intr.ppx
        v = intr.fy * p[:, 1] / z + intr.ppy
    return u, v, z


class TriangleBVH:
    """Axis-aligned bounding volume hierarchy over mesh triangles.

    Built once per placed mesh; `raycast` answers nearest-hit queries for a
    batch of rays sharing one origin, which is the shape of every render.
    """

    def __init__(self, mesh: Mesh, leaf_size: int = 8):
        a, b, c = mesh.triangle_arrays()
        self._a, self._b, self._c = a, b, c
        self._e1 = b - a
        self._e2 = c - a
        n = len(a)
        centroids = (a + b + c) / 3.0
        tri_lo = np.minimum(np.minimum(a, b), c)
        tri_hi = np.maximum(np.maximum(a, b), c)

        order = np.arange(n)
        lo_list: list[np.ndarray] = []
        hi_list: list[np.ndarray] = []
        left: list[int] = []
        right: list[int] = []
        start: list[int] = []
        count: list[int] = []

        def build(idx: np.ndarray, offset: int) -> int:
            node = len(lo_list)
            lo_list.append(tri_lo[idx].min(axis=0))
            hi_list.append(tri_hi[idx].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(offset)
            count.append(len(idx))
            if len(idx) > leaf_size:
                cen = centroids[idx]
                axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
                half = len(idx) // 2
                part = np.argsort(cen[:, axis], kind="stable")
                li, ri = idx[part[:half]], idx[part[half:]]
                left[node] = build(li, offset)
                right[node] = build(ri, offset + half)
                count[node] = 0
            else:
                order[offset : offset + len(idx)] = idx
            return node

        build(np.arange(n), 0)
        self._order = order
        self._lo = np.array(lo_list)
        self._hi = np.array(hi_list)
        self._left = np.array(left)
        self._right = np.array(right)
        self._start = np.array(start)
        self._count = np.array(count)

    def raycast(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """Nearest positive hit parameter per ray, inf where there is none."""
        n = len(dirs)
        best = np.full(n, np.inf)
        if n == 0:
            return best
        o = np.asarray(origin, dtype=float)
        d_safe = np.where(np.abs(dirs) < 1e-30, 1e-30, dirs)
        inv = 1.0 / d_safe
        t_org = o - self._a  # per-triangle origin offset, shared by all rays
        q = np.cross(t_org, self._e1)
        t_num = np.einsum("ij,ij->i", q, self._e2)

        stack = [(0, np.arange(n))]
        while stack:
            node, idx = stack.pop()
            t1 = (self._lo[node] - o) * inv[idx]
            t2 = (self._hi[node] - o) * inv[idx]
            tmin = np.minimum(t1, t2).max(axis=1)
            tmax = np.maximum(t1, t2).min(axis=1)
            keep = (tmax >= np.maximum(tmin, 0.0)) & (tmin < best[idx])
            idx = idx[keep]
            if idx.size == 0:
                continue
            if self._left[node] >= 0:
                stack.append((self._left[node], idx))
                stack.append((self._right[node], idx))
                continue
            s, cnt = self._start[node], self._count[node]
            tris = self._order[s : s + cnt]
            self._leaf_hits(dirs, idx, tris, t_org, q, t_num, best)
        return best

    def _leaf_hits(self, dirs, ridx, tris, t_org, q, t_num, best) -> None:
        # Moller-Trumbore, broadcast rays x triangles. The origin-dependent
        # parts (t_org, q, t_num) are precomputed per triangle.
        d = dirs[ridx][:, None, :]
        e1 = self._e1[tris][None, :, :]
        e2 = self._e2[tris][None, :, :]
        p = np.cross(d, e2)
        det = np.einsum("rtk,rtk->rt", p, np.broadcast_to(e1, p.shape))
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_det = 1.0 / det
            u = np.einsum("rtk,tk->rt", p, t_org[tris]) * inv_det
            v = np.einsum("tk,rtk->rt", q[tris], np.broadcast_to(d, p.shape)) * inv_det
            t = t_num[tris][None, :] * inv_det
            ok = (
                (np.abs(det) > _EPS)
                & (u >= -1e-12)
                & (v >= -1e-12)
                & (u + v <= 1.0 + 1e-12)
                & (t > 1e-9)
            )
        t = np.where(ok, t, np.inf)
        tmin = t.min(axis=1)
        np.minimum.at(best, ridx, tmin)


@dataclass(frozen=True)
class TabletopScene:
    """A mesh posed on the table, with the viewsphere aimed at its middle."""

    mesh: Mesh
    table_side_m: float
    center: np.ndarray
    bvh: TriangleBVH = field(repr=False)


def build_scene(mesh: Mesh, rotation_deg: float = 0.0, table_side_m: float = 0.6) -> TabletopScene:
    """Pose a mesh on the table: footprint centered, rotated about z, resting on z=0."""
    lo, hi = mesh.bounds()
    m = mesh.translated([-(lo[0] + hi[0]) / 2.0, -(lo[1] + hi[1]) / 2.0, -lo[2]])
    m = m.rotated_z(rotation_deg)
    lo, hi = m.bounds()
    center = np.array([0.0, 0.0, (lo[2] + hi[2]) / 2.0])
    return TabletopScene(m, float(table_side_m), center, TriangleBVH(m))


def _pixel_dirs(intr: CameraIntrinsics, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    return np.column_stack(
        [(us - intr.ppx) / intr.fx, (vs - intr.ppy) / intr.fy, np.ones(len(us))]
    )


def _table_depth(origin, dirs_w, side) -> np.ndarray:
    t = np.full(len(dirs_w), np.inf)
    dz = dirs_w[:, 2]
    hit = np.abs(dz) > _EPS
    tt = np.where(hit, -origin[2] / np.where(hit, dz, 1.0), np.inf)
    x = origin[0] + tt * dirs_w[:, 0]
    y = origin[1] + tt * dirs_w[:, 1]
    ok = hit & (tt > 1e-9) & (np.abs(x) <= side / 2.0) & (np.abs(y) <= side / 2.0)
    t[ok] = tt[ok]
    return t


def _object_pixel_rect(scene, R, t, intr) -> tuple[int, int, int, int] | None:
    """Image-space bounding rectangle of the object AABB, padded by one pixel."""
    lo, hi = scene.mesh.bounds()
    corners = np.array(
        [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
    )
    u, v, z = project_points(corners, R, t, intr)
    if np.any(z <= 0):
        return 0, intr.width, 0, intr.height  # camera inside/behind AABB: no culling
    u0 = max(0, int(np.floor(u.min())) - 1)
    u1 = min(intr.width, int(np.ceil(u.max())) + 2)
    v0 = max(0, int(np.floor(v.min())) - 1)
    v1 = min(intr.height, int(np.ceil(v.max())) + 2)
    if u0 >= u1 or v0 >= v1:
        return None
    return u0, u1, v0, v1


def render_depth(
    scene: TabletopScene,
    pose: SphericalPose,
    vcfg: ViewsphereConfig,
    intr: CameraIntrinsics,
    noise_sigma_m: float = 0.0,
    rng: np.random.Generator | None = None,
) -> DepthImage:
    """Render a depth image of the scene from a viewsphere pose.

    Table pixels are intersected analytically; object pixels go through the
    BVH, restricted to the image rectangle covered by the object's bounding
    box. Optional zero-mean Gaussian noise is added to valid depths.
    """
    R, t = camera_extrinsics(pose, vcfg, scene.center)
    h, w = intr.height, intr.width
    uu, vv = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    dirs_cam = _pixel_dirs(intr, uu.ravel(), vv.ravel())
    dirs_w = dirs_cam @ R.T

    depth = _table_depth(t, dirs_w, scene.table_side_m)
    rect = _object_pixel_rect(scene, R, t, intr)
    if rect is not None:
        u0, u1, v0, v1 = rect
        sel = ((uu >= u0) & (uu < u1) & (vv >= v0) & (vv < v1)).ravel()
        obj_t = scene.bvh.raycast(t, dirs_w[sel])
        depth[sel] = np.minimum(depth[sel], obj_t)

    depth[~np.isfinite(depth)] = 0.0
    depth = depth.reshape(h, w)
    if noise_sigma_m > 0.0:
        if rng is None:
            raise ValueError("noise requires an rng")
        valid = depth > 0
        depth = depth + np.where(valid, rng.normal(0.0, noise_sigma_m, depth.shape), 0.0)
        depth[valid] = np.maximum(depth[valid], 1e-6)
    return DepthImage(depth, intr, pose.wrapped(), R, t)


def render_depth_exhaustive(
    scene: TabletopScene,
    pose: SphericalPose,
    vcfg: ViewsphereConfig,
    intr: CameraIntrinsics,
    chunk: int = 4096,
) -> DepthImage:
    """Reference renderer that tests every triangle for every pixel.

    Kept as an independent check on the BVH path; noticeably slower and
    noise-free by construction.
    """
    R, t = camera_extrinsics(pose, vcfg, scene.center)
    h, w = intr.height, intr.width
    uu, vv = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    dirs_w = _pixel_dirs(intr, uu.ravel(), vv.ravel()) @ R.T

    a, b, c = scene.mesh.triangle_arrays()
    e1, e2 = b - a, c - a
    t_org = t - a
    q = np.cross(t_org, e1)
    t_num = np.einsum("ij,ij->i", q, e2)

    depth = _table_depth(t, dirs_w, scene.table_side_m)
    for s in range(0, len(dirs_w), chunk):
        d = dirs_w[s : s + chunk][:, None, :]
        p = np.cross(d, e2[None, :, :])
        det = np.einsum("rtk,tk->rt", p, e1)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_det = 1.0 / det
            u = np.einsum("rtk,tk->rt", p, t_org) * inv_det
            v = np.einsum("tk,rtk->rt", q, np.broadcast_to(d, p.shape)) * inv_det
            tt = t_num[None, :] * inv_det
            ok = (
                (np.abs(det) > _EPS)
                & (u >= -1e-12)
                & (v >= -1e-12)
                & (u + v <= 1.0 + 1e-12)
                & (tt > 1e-9)
            )
        tt = np.where(ok, tt, np.inf)
        depth[s : s + chunk] = np.minimum(depth[s : s + chunk], tt.min(axis=1))

    depth[~np.isfinite(depth)] = 0.0
    return DepthImage(depth.reshape(h, w), intr, pose.wrapped(), R, t)


def depth_to_cloud(img: DepthImage, stride: int = 1) -> np.ndarray:
    """Back-project valid depth pixels to world points, (N,3).

    Exact inverse of `project_points` for the same camera.
    """
    d = img.depth[::stride, ::stride]
    h, w = d.shape
    uu, vv = np.meshgrid(
        np.arange(0, img.depth.shape[1], stride, dtype=float),
        np.arange(0, img.depth.shape[0], stride, dtype=float),
    )
    m = d > 0
    z = d[m]
    x = (uu[m] - img.intrinsics.ppx) * z / img.intrinsics.fx
    y = (vv[m] - img.intrinsics.ppy) * z / img.intrinsics.fy
    pts_cam = np.column_stack([x, y, z])
    return pts_cam @ img.R.T + img.t
