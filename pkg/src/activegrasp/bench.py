"""Benchmark harness: episodes, suites, and the derived metrics.

An episode gives a policy a fixed step budget to find a collision-free
grasp, starting from one canonical viewpoint. Suites run every policy over
the same object rotations with per-episode seeds derived from one master
seed, so results are reproducible and parallelizable without coordination.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import RunConfig, config_from_dict, config_hash, config_to_dict
from .meshes import BUNDLED_OBJECTS
from .policies import BASE_POLICIES, PolicyContext
from .sim import ExplorationSession, GraspSimulator

__all__ = [
    "EpisodeRecord",
    "run_episode",
    "generate_pose_set",
    "run_benchmark",
    "success_by_step",
    "summarize_policies",
    "difficulty_ratio",
    "classify_difficulty",
    "difficulty_table",
    "DEFAULT_POLICIES",
    "COMPARE_POLICIES",
]

# The default suite reports the step-budget policies; the global info-gain
# planner moves off-lattice and is only meaningful in the travel/time
# comparison, so it has its own pairing.
DEFAULT_POLICIES: tuple[str, ...] = ("random", "brick", "bfs", "h2d", "h3d")
COMPARE_POLICIES: tuple[str, ...] = ("h3d", "infogain")


@dataclass
class EpisodeRecord:
    """Everything observable about one episode, JSON-serializable."""

    object_name: str
    rotation_deg: int
    policy: str
    seed: int
    config_hash: str
    success: bool
    success_step: int | None
    steps_used: int
    travel_m: float
    decision_time_s: float
    n_decisions: int
    decisions: list[str] = field(default_factory=list)
    unexplored_counts: list[int] = field(default_factory=list)
    grasp_quality_deg: float | None = None
    grasp_width_m: float | None = None
    grasp_score: float | None = None
    failure_cause: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "EpisodeRecord":
        return EpisodeRecord(**d)


def run_episode(
    sim: GraspSimulator,
    policy_name: str,
    policy_fn,
    rng: np.random.Generator,
    seed: int,
    on_step=None,
) -> EpisodeRecord:
    """Run one policy against one posed object until grasp or budget.

    `on_step(session)` fires after the initial observation and after every
    move, for callers that want to inspect or dump intermediate models.
    """
    cfg = sim.cfg
    session = ExplorationSession(sim)
    ctx = PolicyContext(cfg=cfg, center=sim.scene.center, rng=rng, sim=sim)
    if on_step is not None:
        on_step(session)
    counts = [session.model.unexplored.unexplored_count()]
    decisions: list[str] = []
    decision_time = 0.0
    failure = None
    while not session.succeeded:
        if session.remaining_steps <= 0:
            failure = "budget"
            break
        t0 = time.perf_counter()
        try:
            dec = policy_fn(session.state(), ctx)
        except Exception as exc:  # a crashing policy fails its episode, only its episode
            decision_time += time.perf_counter() - t0
            failure = f"policy_error: {type(exc).__name__}"
            break
        decision_time += time.perf_counter() - t0
        if dec.step_cost > session.remaining_steps:
            failure = "budget"
            break
        if dec.direction is not None:
            decisions.append(dec.direction.name if dec.step_cost == 1 else f"{dec.direction.name}x{dec.step_cost}")
        else:
            decisions.append(f"goto({dec.target.polar_deg:.0f},{dec.target.azimuth_deg:.0f})")
        session.move_to(dec.target, dec.step_cost)
        if on_step is not None:
            on_step(session)
        counts.append(session.model.unexplored.unexplored_count())

    success = session.succeeded
    grasp = session.grasp
    return EpisodeRecord(
        object_name=sim.name,
        rotation_deg=int(sim.rotation_deg),
        policy=policy_name,
        seed=seed,
        config_hash=config_hash(cfg),
        success=success,
        success_step=session.steps_used if success else None,
        steps_used=session.steps_used if success else cfg.episode.max_steps,
        travel_m=session.travel_m,
        decision_time_s=decision_time,
        n_decisions=len(decisions),
        decisions=decisions,
        unexplored_counts=counts,
        grasp_quality_deg=float(grasp.quality_deg) if grasp else None,
        grasp_width_m=float(grasp.width_m) if grasp else None,
        grasp_score=float(grasp.score) if grasp else None,
        failure_cause=failure,
    )


def generate_pose_set(n: int, seed: int, object_index: int = 0) -> list[int]:
    """Shared random z-rotations for one object, identical for every policy."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 400 + object_index]))
    return [int(r) for r in rng.integers(0, 360, size=n)]


def _resolve_policies(names, model_paths=None):
    from .ml.policy import policy_from_file

    model_paths = model_paths or {}
    resolved = {}
    manifests = {}
    for name in names:
        if name in BASE_POLICIES:
            resolved[name] = BASE_POLICIES[name]
            manifests[name] = None
        elif name in model_paths:
            kind, fn, meta = policy_from_file(model_paths[name])
            resolved[name] = fn
            manifests[name] = meta
        else:
            raise KeyError(
                f"unknown policy {name!r}: not built in and no model path given"
            )
    return resolved, manifests


def _check_train_test(objects, manifests) -> None:
    for name, meta in manifests.items():
        if not meta:
            continue
        trained_on = set(meta.get("objects") or [])
        overlap = trained_on & set(objects)
        if overlap:
            raise ValueError(
                f"policy {name!r} was trained on {sorted(overlap)}; "
                "benchmarking on training meshes is not allowed"
            )


def _run_unit(args) -> list[dict]:
    """One (object, rotation) against every policy. Safe to run in a worker."""
    cfg_dict, obj_name, obj_idx, rot, pose_idx, names, model_paths, seed = args
    cfg = config_from_dict(cfg_dict)
    resolved, _ = _resolve_policies(names, model_paths)
    sim = GraspSimulator(obj_name, rot, cfg)
    out = []
    for li, name in enumerate(names):
        ep_seed_seq = np.random.SeedSequence([cfg.seed, obj_idx, pose_idx, li])
        rng = np.random.default_rng(ep_seed_seq)
        rec = run_episode(sim, name, resolved[name], rng, seed=cfg.seed)
        out.append(rec.to_dict())
    return out


def run_benchmark(
    cfg: RunConfig,
    objects=BUNDLED_OBJECTS,
    poses_per_object: int = 20,
    policies=DEFAULT_POLICIES,
    model_paths: dict | None = None,
    jobs: int = 1,
    progress=None,
) -> list[EpisodeRecord]:
    """Run the full suite and return one record per (object, pose, policy).

    All policies share each (object, rotation) pair, including its simulator
    caches, which makes the lookahead baseline affordable. `jobs > 1`
    distributes (object, rotation) units across processes.
    """
    _, manifests = _resolve_policies(policies, model_paths)
    _check_train_test(objects, manifests)
    units = []
    for oi, name in enumerate(objects):
        rotations = generate_pose_set(poses_per_object, cfg.seed, oi)
        for pi, rot in enumerate(rotations):
            units.append(
                (config_to_dict(cfg), name, oi, rot, pi, tuple(policies), model_paths, cfg.seed)
            )
    records: list[EpisodeRecord] = []
    if jobs <= 1:
        for i, unit in enumerate(units):
            for d in _run_unit(unit):
                records.append(EpisodeRecord.from_dict(d))
            if progress is not None:
                progress(i + 1, len(units))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, dicts in enumerate(pool.map(_run_unit, units)):
                for d in dicts:
                    records.append(EpisodeRecord.from_dict(d))
                if progress is not None:
                    progress(i + 1, len(units))
    return records


def success_by_step(records, max_steps: int) -> dict[str, np.ndarray]:
    """Cumulative success fraction per policy at step budgets 0..max_steps."""
    out: dict[str, np.ndarray] = {}
    by_policy: dict[str, list[EpisodeRecord]] = {}
    for r in records:
        by_policy.setdefault(r.policy, []).append(r)
    for name, rows in by_policy.items():
        curve = np.zeros(max_steps + 1)
        for k in range(max_steps + 1):
            hits = sum(1 for r in rows if r.success and r.success_step is not None and r.success_step <= k)
            curve[k] = hits / len(rows)
        out[name] = curve
    return out


def summarize_policies(records, max_steps: int) -> list[dict]:
    """Per-policy aggregate table rows, sorted by policy name."""
    by_policy: dict[str, list[EpisodeRecord]] = {}
    for r in records:
        by_policy.setdefault(r.policy, []).append(r)
    rows = []
    for name in sorted(by_policy):
        rs = by_policy[name]
        n = len(rs)
        steps = [r.steps_used if r.success else max_steps for r in rs]
        n_dec = sum(r.n_decisions for r in rs)
        rows.append(
            {
                "policy": name,
                "episodes": n,
                "success_rate": sum(r.success for r in rs) / n,
                "mean_steps": float(np.mean(steps)),
                "mean_travel_m": float(np.mean([r.travel_m for r in rs])),
                "mean_decision_s": (
                    sum(r.decision_time_s for r in rs) / n_dec if n_dec else 0.0
                ),
            }
        )
    return rows


def difficulty_ratio(records, object_name: str, at_step: int = 2) -> float:
    """Random-vs-lookahead success ratio at a fixed small budget.

    An object where random search already matches the exhaustive baseline
    is easy; a low ratio means success hinges on choosing the right views.
    """
    rows = [r for r in records if r.object_name == object_name]
    def frac(policy):
        sel = [r for r in rows if r.policy == policy]
        if not sel:
            return 0.0
        hits = sum(
            1 for r in sel if r.success and r.success_step is not None and r.success_step <= at_step
        )
        return hits / len(sel)

    rnd = frac("random")
    bfs = frac("bfs")
    if bfs == 0.0:
        return 1.0
    return rnd / bfs


def classify_difficulty(ratio: float) -> str:
    if ratio <= 0.40:
        return "hard"
    if ratio <= 0.80:
        return "medium"
    return "easy"


def difficulty_table(records, objects) -> list[dict]:
    rows = []
    for name in objects:
        ratio = difficulty_ratio(records, name)
        rows.append({"object": name, "ratio": round(ratio, 4), "band": classify_difficulty(ratio)})
    return rows


def effective_steps(travel_m: float, cfg: RunConfig) -> float:
    """Travel expressed in units of one lattice step of arc."""
    step_arc = cfg.viewsphere.radius_m * math.radians(cfg.viewsphere.step_deg)
    return travel_m / step_arc


def comparison_table(records, cfg: RunConfig) -> list[dict]:
    """Travel and decision-latency comparison rows (one per policy)."""
    by_policy: dict[str, list[EpisodeRecord]] = {}
    for r in records:
        by_policy.setdefault(r.policy, []).append(r)
    rows = []
    for name in sorted(by_policy):
        rs = by_policy[name]
        n_dec = sum(r.n_decisions for r in rs)
        rows.append(
            {
                "policy": name,
                "episodes": len(rs),
                "success_rate": sum(r.success for r in rs) / len(rs),
                "mean_travel_m": float(np.mean([r.travel_m for r in rs])),
                "mean_effective_steps": float(
                    np.mean([effective_steps(r.travel_m, cfg) for r in rs])
                ),
                "mean_decision_s": (
                    sum(r.decision_time_s for r in rs) / n_dec if n_dec else 0.0
                ),
            }
        )
    return rows
