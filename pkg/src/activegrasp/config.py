"""Run configuration: one object holding every named constant of the system.

A config can round-trip through YAML (partial files override defaults) and
hashes to a short digest that tags every artifact produced from it, so
outputs are traceable to the exact parameter set that made them.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import yaml

from .grasp import GraspParams, GripperModel
from .scene import CameraIntrinsics
from .viewsphere import ViewsphereConfig

__all__ = [
    "CloudParams",
    "PolicyParams",
    "EpisodeParams",
    "MLParams",
    "RunConfig",
    "config_to_dict",
    "config_from_dict",
    "load_config",
    "save_config",
    "config_hash",
]


@dataclass(frozen=True)
class CloudParams:
    voxel_size_m: float = 0.005
    unexplored_spacing_m: float = 0.01
    depth_tolerance_scale: float = 1.5  # times voxel_size_m
    ransac_distance_m: float = 0.005
    ransac_iterations: int = 500
    ransac_min_inlier_frac: float = 0.30
    table_clearance_m: float = 0.008


@dataclass(frozen=True)
class PolicyParams:
    """Knobs of the planning heuristics."""

    points_threshold: int = 20
    cone_half_angle_deg: float = 15.0
    object_dilate_px: int = 2
    unexplored_dilate_px: int = 1
    occluder_disk_scale: float = 1.5  # disk radius in units of voxel size
    h3d_contact_cap: int = 800
    h3d_useful_cap: int = 600
    occluder_cap: int = 1500
    infogain_point_cap: int = 3000
    bfs_max_depth: int = 6
    bfs_node_budget: int = 4000


@dataclass(frozen=True)
class EpisodeParams:
    max_steps: int = 6
    start_polar_deg: float = 45.0
    start_azimuth_deg: float = 0.0


@dataclass(frozen=True)
class MLParams:
    haf_grid_n: int = 5
    haf_region_m: float = 0.3
    pca_components: int = 26
    selfsup_poses_per_object: int = 200
    selfsup_rollouts: int = 3
    selfsup_rollout_steps: int = 5
    logreg_iterations: int = 400
    logreg_lr: float = 0.5
    logreg_l2: float = 1e-4
    lda_ridge: float = 1e-6
    q_hidden: tuple[int, ...] = (128, 128, 128, 128)
    q_episodes: int = 300
    q_gamma: float = 0.9
    q_lr: float = 1e-3
    q_replay_capacity: int = 10000
    q_batch_size: int = 64
    q_eps_start: float = 1.0
    q_eps_end: float = 0.05
    q_eps_fraction: float = 0.6


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    table_side_m: float = 0.6
    noise_sigma_m: float = 0.0
    viewsphere: ViewsphereConfig = field(default_factory=ViewsphereConfig)
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    cloud: CloudParams = field(default_factory=CloudParams)
    gripper: GripperModel = field(default_factory=GripperModel)
    grasp: GraspParams = field(default_factory=GraspParams)
    policy: PolicyParams = field(default_factory=PolicyParams)
    episode: EpisodeParams = field(default_factory=EpisodeParams)
    ml: MLParams = field(default_factory=MLParams)

    @property
    def depth_tolerance_m(self) -> float:
        return self.cloud.depth_tolerance_scale * self.cloud.voxel_size_m

    @property
    def unexplored_margin_m(self) -> float:
        # The grid must cover anywhere a finger could reach past the surface.
        return self.gripper.max_opening_m


_SECTIONS = {
    "viewsphere": ViewsphereConfig,
    "intrinsics": CameraIntrinsics,
    "cloud": CloudParams,
    "gripper": GripperModel,
    "grasp": GraspParams,
    "policy": PolicyParams,
    "episode": EpisodeParams,
    "ml": MLParams,
}


def config_to_dict(cfg: RunConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["ml"]["q_hidden"] = list(d["ml"]["q_hidden"])
    return d


def config_from_dict(data: dict) -> RunConfig:
    """Build a config from a (possibly partial) nested dict of overrides."""
    data = dict(data or {})
    kwargs = {}
    for key in ("seed", "table_side_m", "noise_sigma_m"):
        if key in data:
            kwargs[key] = data[key]
    for name, cls in _SECTIONS.items():
        section = dict(data.get(name) or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(section) - known
        if unknown:
            raise ValueError(f"unknown {name} option(s): {sorted(unknown)}")
        if name == "ml" and "q_hidden" in section:
            section["q_hidden"] = tuple(int(x) for x in section["q_hidden"])
        kwargs[name] = cls(**section)
    unknown_top = set(data) - set(_SECTIONS) - {"seed", "table_side_m", "noise_sigma_m"}
    if unknown_top:
        raise ValueError(f"unknown config section(s): {sorted(unknown_top)}")
    return RunConfig(**kwargs)


def load_config(path=None) -> RunConfig:
    """Load a YAML config file; None gives all defaults."""
    if path is None:
        return RunConfig()
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError("config file must contain a mapping")
    return config_from_dict(data)


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=True)


def config_hash(cfg: RunConfig) -> str:
    """Short stable digest of the full parameter set."""
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]
