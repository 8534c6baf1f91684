"""Triangle meshes: OBJ IO, parametric builders, and the bundled object set.

All meshes are in meters. Bundled benchmark objects are authored resting on
the z=0 plane with their footprint centered on the origin, so a rotation
about the world z axis is enough to pose them on the table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "Mesh",
    "load_obj",
    "save_obj",
    "make_box",
    "make_icosphere",
    "concat_meshes",
    "BUNDLED_OBJECTS",
    "bundled_mesh",
]


@dataclass(frozen=True)
class Mesh:
    """Indexed triangle mesh. vertices: (V,3) float64, faces: (F,3) int32."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int32)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError("vertices must be (V,3)")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError("faces must be (F,3)")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("face index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def translated(self, offset) -> "Mesh":
        return Mesh(self.vertices + np.asarray(offset, dtype=float), self.faces)

    def rotated_z(self, angle_deg: float) -> "Mesh":
        """Rotate about the world z axis through the origin."""
        a = math.radians(angle_deg)
        c, s = math.cos(a), math.sin(a)
        R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return Mesh(self.vertices @ R.T, self.faces)

    def triangle_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-triangle corner arrays (each (F,3)), for vectorized ray tests."""
        v = self.vertices
        f = self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]


def load_obj(path) -> Mesh:
    """Read a Wavefront OBJ. Polygon faces are fan-triangulated.

    Only `v` and `f` records are used; texture/normal indices in `f`
    entries are ignored.
    """
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not verts or not faces:
        raise ValueError(f"no triangles in OBJ file: {path}")
    return Mesh(np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int32))


def save_obj(mesh: Mesh, path) -> None:
    """Write an ASCII OBJ with deterministic formatting."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


_BOX_FACES = np.array(
    [
        [0, 2, 1], [0, 3, 2],  # bottom (z-)
        [4, 5, 6], [4, 6, 7],  # top (z+)
        [0, 1, 5], [0, 5, 4],  # y-
        [3, 7, 6], [3, 6, 2],  # y+
        [1, 2, 6], [1, 6, 5],  # x+
        [0, 4, 7], [0, 7, 3],  # x-
    ],
    dtype=np.int32,
)


def make_box(size, center=(0.0, 0.0, 0.0)) -> Mesh:
    """Axis-aligned box with the given (sx, sy, sz) extents and center."""
    sx, sy, sz = (float(s) / 2.0 for s in size)
    cx, cy, cz = (float(c) for c in center)
    verts = np.array(
        [
            [cx - sx, cy - sy, cz - sz],
            [cx + sx, cy - sy, cz - sz],
            [cx + sx, cy + sy, cz - sz],
            [cx - sx, cy + sy, cz - sz],
            [cx - sx, cy - sy, cz + sz],
            [cx + sx, cy - sy, cz + sz],
            [cx + sx, cy + sy, cz + sz],
            [cx - sx, cy + sy, cz + sz],
        ]
    )
    return Mesh(verts, _BOX_FACES.copy())


def concat_meshes(meshes) -> Mesh:
    """Merge meshes into one, reindexing faces."""
    verts = []
    faces = []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        offset += len(m.vertices)
    return Mesh(np.vstack(verts), np.vstack(faces))


def make_icosphere(radius: float, center=(0.0, 0.0, 0.0), subdivisions: int = 3) -> Mesh:
    """Geodesic sphere from a subdivided icosahedron."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    vlist = [tuple(v) for v in verts]
    cache: dict[tuple[int, int], int] = {}

    def midpoint(i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        if key in cache:
            return cache[key]
        p = np.array(vlist[i]) + np.array(vlist[j])
        p /= np.linalg.norm(p)
        vlist.append(tuple(p))
        cache[key] = len(vlist) - 1
        return cache[key]

    for _ in range(subdivisions):
        nxt = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            nxt += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        faces = nxt
    v = np.array(vlist) * radius + np.asarray(center, dtype=float)
    return Mesh(v, np.array(faces, dtype=np.int32))


def _footprint_centered(mesh: Mesh) -> Mesh:
    """Center the footprint on the origin and rest the mesh on z=0."""
    lo, hi = mesh.bounds()
    return mesh.translated([-(lo[0] + hi[0]) / 2.0, -(lo[1] + hi[1]) / 2.0, -lo[2]])


def _build_prism(sx: float, sy: float, sz: float) -> Mesh:
    return make_box((sx, sy, sz), center=(0.0, 0.0, sz / 2.0))


def _build_handle() -> Mesh:
    # U channel: two uprights bridged on top, opening facing sideways.
    leg = 0.02
    width = 0.10   # outer span along x
    depth = 0.05   # along y
    height = 0.07
    left = make_box((leg, depth, height), center=(-(width - leg) / 2.0, 0.0, height / 2.0))
    right = make_box((leg, depth, height), center=((width - leg) / 2.0, 0.0, height / 2.0))
    top = make_box((width - 2 * leg, depth, leg), center=(0.0, 0.0, height - leg / 2.0))
    return _footprint_centered(concat_meshes([left, right, top]))


def _build_gasket() -> Mesh:
    # Flat square frame: four bars around a through hole.
    outer = 0.12
    bar = 0.025
    height = 0.03
    half = (outer - bar) / 2.0
    bars = [
        make_box((outer, bar, height), center=(0.0, -half, height / 2.0)),
        make_box((outer, bar, height), center=(0.0, half, height / 2.0)),
        make_box((bar, outer - 2 * bar, height), center=(-half, 0.0, height / 2.0)),
        make_box((bar, outer - 2 * bar, height), center=(half, 0.0, height / 2.0)),
    ]
    return _footprint_centered(concat_meshes(bars))


def _build_cinder_block() -> Mesh:
    # Rectangular block with two rectangular through holes, like a masonry unit.
    length = 0.18
    width = 0.09
    height = 0.08
    wall = 0.022
    web = 0.024
    hole_len = (length - 2 * wall - web) / 2.0
    inner_w = width - 2 * wall
    parts = [
        make_box((wall, width, height), center=(-(length - wall) / 2.0, 0.0, height / 2.0)),
        make_box((wall, width, height), center=((length - wall) / 2.0, 0.0, height / 2.0)),
        make_box((web, width, height), center=(0.0, 0.0, height / 2.0)),
        make_box((hole_len, wall, height),
                 center=(-(web + hole_len) / 2.0, (inner_w + wall) / 2.0, height / 2.0)),
        make_box((hole_len, wall, height),
                 center=(-(web + hole_len) / 2.0, -(inner_w + wall) / 2.0, height / 2.0)),
        make_box((hole_len, wall, height),
                 center=((web + hole_len) / 2.0, (inner_w + wall) / 2.0, height / 2.0)),
        make_box((hole_len, wall, height),
                 center=((web + hole_len) / 2.0, -(inner_w + wall) / 2.0, height / 2.0)),
    ]
    return _footprint_centered(concat_meshes(parts))


_BUILDERS = {
    "prism_6x6x6": lambda: _build_prism(0.06, 0.06, 0.06),
    "prism_10x7x4": lambda: _build_prism(0.10, 0.07, 0.04),
    "prism_20x6x5": lambda: _build_prism(0.20, 0.06, 0.05),
    "handle": _build_handle,
    "gasket": _build_gasket,
    "cinder_block": _build_cinder_block,
}

# Names of the objects shipped with the package, in benchmark order.
BUNDLED_OBJECTS: tuple[str, ...] = (
    "prism_6x6x6",
    "prism_10x7x4",
    "prism_20x6x5",
    "handle",
    "gasket",
    "cinder_block",
)


def bundled_mesh(name: str) -> Mesh:
    """Load a bundled object by name, or any mesh by .obj path."""
    if name in _BUILDERS:
        ref = resources.files("activegrasp") / "meshes" / f"{name}.obj"
        with resources.as_file(ref) as p:
            if p.exists():
                return load_obj(p)
        # Fall back to the parametric builder if package data is missing.
        return _BUILDERS[name]()
    p = Path(name)
    if p.suffix == ".obj" and p.exists():
        return load_obj(p)
    raise KeyError(f"unknown object {name!r}; bundled: {', '.join(BUNDLED_OBJECTS)}")


def regenerate_bundled(directory) -> None:
    """Write the bundled OBJ files from their parametric builders."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in BUNDLED_OBJECTS:
        save_obj(_BUILDERS[name](), d / f"{name}.obj")


if __name__ == "__main__":
    regenerate_bundled(Path(__file__).parent / "meshes")
