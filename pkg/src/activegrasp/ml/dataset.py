"""Self-supervised direction labels from short random rollouts.

For every sampled object pose, each compass direction is tried as a first
move and finished with a few random steps; the label is the direction whose
best rollout found a grasp soonest. No human annotation is involved; the
simulator's own grasp check supplies the signal.
"""
from __future__ import annotations

import numpy as np

from ..config import RunConfig
from ..sim import ExplorationSession, GraspSimulator
from ..viewsphere import DIRECTION_ORDER, enumerate_neighbors, neighbor_pose
from .features import state_vector

__all__ = ["generate_direction_dataset"]


def _rollout_steps(sim, first_pose, max_steps: int, rng) -> int | None:
    """Steps until a grasp when starting with a fixed first move; None if never."""
    session = ExplorationSession(sim)
    session.move_to(first_pose, 1)
    while not session.succeeded and session.steps_used < max_steps:
        options = enumerate_neighbors(session.pose, sim.cfg.viewsphere)
        _, pose = options[int(rng.integers(len(options)))]
        session.move_to(pose, 1)
    return session.steps_used if session.succeeded else None


def generate_direction_dataset(
    cfg: RunConfig,
    objects,
    poses_per_object: int | None = None,
    seed: int = 0,
    progress=None,
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Build (X, y, meta): state vectors labeled with the best first direction.

    Poses where the start view already grasps, or where no rollout ever
    succeeds, are skipped. meta records the objects used so downstream
    evaluation can enforce train/test separation.
    """
    ml = cfg.ml
    per_obj = poses_per_object if poses_per_object is not None else ml.selfsup_poses_per_object
    master = np.random.SeedSequence([seed, 2024])
    rot_rng = np.random.default_rng(master.spawn(1)[0])
    roll_rng = np.random.default_rng(master.spawn(1)[0])

    X_rows = []
    y_rows = []
    total = len(objects) * per_obj
    done = 0
    for name in objects:
        rotations = rot_rng.integers(0, 360, size=per_obj)
        for rot in rotations:
            sim = GraspSimulator(name, int(rot), cfg)
            session = ExplorationSession(sim)
            done += 1
            if session.succeeded:
                if progress is not None:
                    progress(done, total, len(y_rows))
                continue
            s0 = state_vector(session.model, session.pose, ml.haf_grid_n, ml.haf_region_m)
            budget = min(ml.selfsup_rollout_steps, cfg.episode.max_steps)
            best_steps = None
            best_dir = None
            for d in DIRECTION_ORDER:
                first = neighbor_pose(session.pose, d, cfg.viewsphere)
                if first is None:
                    continue
                for _ in range(ml.selfsup_rollouts):
                    steps = _rollout_steps(sim, first, budget, roll_rng)
                    if steps is not None and (best_steps is None or steps < best_steps):
                        best_steps = steps
                        best_dir = d
            if best_dir is not None:
                X_rows.append(s0)
                y_rows.append(int(best_dir))
            if progress is not None:
                progress(done, total, len(y_rows))

    X = np.array(X_rows) if X_rows else np.zeros((0, 2 * ml.haf_grid_n**2 + 2))
    y = np.array(y_rows, dtype=int)
    meta = {"objects": list(objects), "poses_per_object": per_obj, "seed": seed}
    return X, y, meta
