"""Simulation driver: cached rendering, model fusion, and episode stepping.

A `GraspSimulator` owns one posed object and memoizes everything that is a
pure function of the set of visited viewpoints: depth images, segmented
per-view clouds, fused scene models, and synthesized grasps. Lookahead
planners and repeated rollouts therefore pay for each distinct view set only
once. An `ExplorationSession` walks a camera over the viewsphere against a
simulator and tracks the episode bookkeeping (steps, travel, success).
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .cloud import (
    SceneModel,
    UnexploredGrid,
    _conservative_env_depth,
    fuse_clouds,
    init_unexplored,
    segment_table,
    update_unexplored,
    voxel_downsample,
)
from .config import RunConfig
from .grasp import GraspCandidate, select_best_grasp
from .meshes import Mesh, bundled_mesh
from .scene import DepthImage, TabletopScene, build_scene, depth_to_cloud, render_depth
from .viewsphere import SphericalPose, arc_distance, pose_cell

__all__ = ["ViewData", "GraspSimulator", "ExplorationState", "ExplorationSession"]

Cell = tuple[int, int]


@dataclass(frozen=True)
class ViewData:
    """One rendered viewpoint: depth image plus segmented world clouds."""

    img: DepthImage
    cloud: np.ndarray
    object_points: np.ndarray
    table_points: np.ndarray


class GraspSimulator:
    """Ground-truth scene plus memoized perception for one posed object."""

    # Full models are heavy (clouds plus grid masks); lookahead planners touch
    # thousands of view sets per episode, so the model cache is bounded and
    # the per-set explored masks are kept separately in packed form.
    _MODEL_CACHE_CAP = 256

    def __init__(self, mesh: Mesh | str, rotation_deg: float, cfg: RunConfig, name: str | None = None):
        if isinstance(mesh, str):
            name = name or mesh
            mesh = bundled_mesh(mesh)
        self.name = name or "mesh"
        self.cfg = cfg
        self.rotation_deg = float(rotation_deg)
        self.scene: TabletopScene = build_scene(mesh, rotation_deg, cfg.table_side_m)
        self._noise_rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, int(rotation_deg * 1000) & 0x7FFFFFFF, 77])
        )
        self._views: dict[Cell, ViewData] = {}
        self._poses: dict[Cell, SphericalPose] = {}
        self._envs: dict[Cell, np.ndarray] = {}
        self._grids: dict[Cell, UnexploredGrid] = {}
        self._masks: dict[tuple[Cell, frozenset[Cell]], np.ndarray] = {}
        self._models: OrderedDict[tuple[Cell, frozenset[Cell], bool], SceneModel] = OrderedDict()
        self._grasps: dict[tuple[Cell, frozenset[Cell]], GraspCandidate | None] = {}

    def view(self, pose: SphericalPose) -> ViewData:
        cell = pose_cell(pose)
        cached = self._views.get(cell)
        if cached is not None:
            return cached
        img = render_depth(
            self.scene,
            pose,
            self.cfg.viewsphere,
            self.cfg.intrinsics,
            noise_sigma_m=self.cfg.noise_sigma_m,
            rng=self._noise_rng if self.cfg.noise_sigma_m > 0 else None,
        )
        cloud = voxel_downsample(depth_to_cloud(img), self.cfg.cloud.voxel_size_m)
        obj, table = segment_table(
            cloud,
            self.cfg.cloud.ransac_distance_m,
            self.cfg.cloud.ransac_iterations,
            self.cfg.cloud.ransac_min_inlier_frac,
            self.cfg.cloud.table_clearance_m,
        )
        data = ViewData(img, cloud, obj, table)
        self._views[cell] = data
        self._poses[cell] = pose.wrapped()
        return data

    def _grid_template(self, start: SphericalPose) -> UnexploredGrid:
        """Unexplored lattice anchored on the first observation of an episode.

        The footprint is fixed for the whole episode so the unexplored count
        can only shrink as views accumulate.
        """
        cell = pose_cell(start)
        grid = self._grids.get(cell)
        if grid is None:
            first = self.view(start)
            seed_pts = first.object_points if len(first.object_points) else first.cloud
            grid = init_unexplored(
                seed_pts, self.cfg.cloud.unexplored_spacing_m, self.cfg.unexplored_margin_m
            )
            self._grids[cell] = grid
        return grid

    def _key(self, start: SphericalPose, poses) -> tuple[Cell, frozenset[Cell]]:
        cells = frozenset(pose_cell(p) for p in poses) | {pose_cell(start)}
        return pose_cell(start), cells

    def _env(self, cell: Cell) -> np.ndarray:
        env = self._envs.get(cell)
        if env is None:
            env = _conservative_env_depth(self._views[cell].img)
            self._envs[cell] = env
        return env

    def _grid_for(self, start: SphericalPose, cells: frozenset[Cell], by_cell: dict) -> UnexploredGrid:
        """Explored grid for a view set, extending a cached subset when it can.

        Clearing cells is a monotone OR over views, so building on any cached
        one-view-smaller mask gives exactly the same grid as replaying every
        view; lookahead searches visit parents first and always hit that path.
        """
        template = self._grid_template(start)
        mkey = (pose_cell(start), cells)
        packed = self._masks.get(mkey)
        tol = self.cfg.depth_tolerance_m
        if packed is not None:
            explored = np.unpackbits(packed, count=len(template.points)).astype(bool)
            return UnexploredGrid(template.points, explored, template.spacing_m)
        grid = None
        for c in sorted(cells):
            if c == pose_cell(start):
                continue
            parent = self._masks.get((pose_cell(start), cells - {c}))
            if parent is None:
                continue
            explored = np.unpackbits(parent, count=len(template.points)).astype(bool)
            grid = UnexploredGrid(template.points, explored, template.spacing_m)
            grid = update_unexplored(grid, self.view(by_cell[c]).img, tol, env=self._env(c))
            break
        if grid is None:
            grid = template
            for c in sorted(cells):
                grid = update_unexplored(grid, self.view(by_cell[c]).img, tol, env=self._env(c))
        self._masks[mkey] = np.packbits(grid.explored)
        return grid

    def model_for(self, start: SphericalPose, poses, include_table: bool = True) -> SceneModel:
        """Fused scene model for a set of visited poses (order-independent)."""
        start_cell, cells = self._key(start, poses)
        key = (start_cell, cells, include_table)
        model = self._models.get(key)
        if model is not None:
            self._models.move_to_end(key)
            return model
        by_cell = {pose_cell(p): p for p in poses}
        by_cell[start_cell] = start
        ordered = [by_cell[c] for c in sorted(cells)]
        views = [self.view(p) for p in ordered]

        obj = fuse_clouds([v.object_points for v in views], self.cfg.cloud.voxel_size_m)
        if include_table:
            table = fuse_clouds([v.table_points for v in views], self.cfg.cloud.voxel_size_m)
        else:
            table = np.zeros((0, 3))
        grid = self._grid_for(start, cells, by_cell)
        model = SceneModel(obj, table, grid)
        self._models[key] = model
        while len(self._models) > self._MODEL_CACHE_CAP:
            self._models.popitem(last=False)
        return model

    def best_grasp(self, start: SphericalPose, poses) -> GraspCandidate | None:
        """Best collision-free grasp for a view set; memoized with the model."""
        key = self._key(start, poses)
        if key in self._grasps:
            return self._grasps[key]
        model = self.model_for(start, poses, include_table=False)
        grasp = select_best_grasp(model, self.cfg.gripper, self.cfg.grasp)
        self._grasps[key] = grasp
        return grasp

    def cache_stats(self) -> dict[str, int]:
        return {
            "views": len(self._views),
            "models": len(self._models),
            "grasps": len(self._grasps),
        }


@dataclass(frozen=True)
class ExplorationState:
    """Snapshot handed to a policy when it must pick the next view."""

    pose: SphericalPose
    model: SceneModel
    steps_used: int
    travel_m: float
    visited: tuple[SphericalPose, ...]
    grasp: GraspCandidate | None = field(repr=False, default=None)


class ExplorationSession:
    """One exploration episode against a simulator."""

    def __init__(self, sim: GraspSimulator, start: SphericalPose | None = None):
        cfg = sim.cfg
        self.sim = sim
        self.cfg = cfg
        if start is None:
            start = SphericalPose(cfg.episode.start_polar_deg, cfg.episode.start_azimuth_deg)
        self.start = start.wrapped()
        self.visited: list[SphericalPose] = [self.start]
        self.steps_used = 0
        self.travel_m = 0.0
        self._refresh()

    def _refresh(self) -> None:
        self.model = self.sim.model_for(self.start, self.visited)
        self.grasp = self.sim.best_grasp(self.start, self.visited)

    @property
    def pose(self) -> SphericalPose:
        return self.visited[-1]

    @property
    def succeeded(self) -> bool:
        return self.grasp is not None

    @property
    def remaining_steps(self) -> int:
        return self.cfg.episode.max_steps - self.steps_used

    def state(self) -> ExplorationState:
        return ExplorationState(
            pose=self.pose,
            model=self.model,
            steps_used=self.steps_used,
            travel_m=self.travel_m,
            visited=tuple(self.visited),
            grasp=self.grasp,
        )

    def move_to(self, pose: SphericalPose, step_cost: int) -> None:
        """Fly the camera to a pose, paying `step_cost` budget steps."""
        if step_cost < 1:
            raise ValueError("step cost must be >= 1")
        if step_cost > self.remaining_steps:
            raise ValueError("move exceeds the remaining step budget")
        pose = pose.wrapped()
        self.travel_m += arc_distance(self.pose, pose, self.cfg.viewsphere)
        self.steps_used += step_cost
        self.visited.append(pose)
        self._refresh()
