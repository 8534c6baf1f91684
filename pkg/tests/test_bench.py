import numpy as np
import pytest

from activegrasp.bench import (
    COMPARE_POLICIES,
    DEFAULT_POLICIES,
    EpisodeRecord,
    classify_difficulty,
    comparison_table,
    difficulty_ratio,
    difficulty_table,
    effective_steps,
    generate_pose_set,
    run_benchmark,
    run_episode,
    success_by_step,
    summarize_policies,
)
from activegrasp.policies import BASE_POLICIES


def _rec(policy, object_name="obj", success=True, success_step=2, steps_used=2, **kw):
    base = dict(
        object_name=object_name,
        rotation_deg=0,
        policy=policy,
        seed=0,
        config_hash="x",
        success=success,
        success_step=success_step if success else None,
        steps_used=steps_used,
        travel_m=0.2,
        decision_time_s=0.01,
        n_decisions=steps_used,
    )
    base.update(kw)
    return EpisodeRecord(**base)


def test_default_policy_sets():
    assert DEFAULT_POLICIES == ("random", "brick", "bfs", "h2d", "h3d")
    assert COMPARE_POLICIES == ("h3d", "infogain")
    for name in DEFAULT_POLICIES + COMPARE_POLICIES:
        assert name in BASE_POLICIES


def test_generate_pose_set_deterministic():
    a = generate_pose_set(20, seed=0, object_index=1)
    b = generate_pose_set(20, seed=0, object_index=1)
    c = generate_pose_set(20, seed=0, object_index=2)
    d = generate_pose_set(20, seed=1, object_index=1)
    assert a == b
    assert a != c
    assert a != d
    assert all(0 <= r < 360 for r in a)


def test_run_episode_record_shape(cfg, cube_sim, rng):
    rec = run_episode(cube_sim, "brick", BASE_POLICIES["brick"], rng, seed=0)
    assert rec.policy == "brick"
    assert rec.object_name == "prism_6x6x6"
    assert 1 <= rec.steps_used <= cfg.episode.max_steps
    assert rec.n_decisions == len(rec.decisions)
    assert len(rec.unexplored_counts) >= 1
    # Monotone non-increasing unexplored counts within the episode.
    assert all(b <= a for a, b in zip(rec.unexplored_counts, rec.unexplored_counts[1:]))
    if rec.success:
        assert rec.success_step == rec.steps_used
        assert rec.grasp_quality_deg is not None
    else:
        assert rec.steps_used == cfg.episode.max_steps
        assert rec.failure_cause == "budget"


def test_success_by_step_monotone():
    recs = [
        _rec("p", success=True, success_step=1, steps_used=1),
        _rec("p", success=True, success_step=3, steps_used=3),
        _rec("p", success=False, success_step=None, steps_used=6),
        _rec("p", success=True, success_step=0, steps_used=0),
    ]
    curves = success_by_step(recs, max_steps=6)
    c = curves["p"]
    assert len(c) == 7  # steps 0..6 inclusive
    assert all(b >= a for a, b in zip(c, c[1:]))
    assert c[0] == pytest.approx(0.25)
    assert c[6] == pytest.approx(0.75)


def test_difficulty_ratio_and_bands():
    recs = []
    # random: 1 of 4 within step 2; bfs: 4 of 4.
    for ok in (True, False, False, False):
        recs.append(_rec("random", success=ok, success_step=2 if ok else None,
                         steps_used=2 if ok else 6))
    for _ in range(4):
        recs.append(_rec("bfs", success=True, success_step=2, steps_used=2))
    assert difficulty_ratio(recs, "obj") == pytest.approx(0.25)
    assert classify_difficulty(0.25) == "hard"
    assert classify_difficulty(0.60) == "medium"
    assert classify_difficulty(1.0) == "easy"
    table = difficulty_table(recs, ["obj"])
    assert table[0]["band"] == "hard"


def test_difficulty_ratio_degenerate_bfs():
    recs = [_rec("random", success=False, success_step=None, steps_used=6),
            _rec("bfs", success=False, success_step=None, steps_used=6)]
    assert difficulty_ratio(recs, "obj") == 1.0


def test_effective_steps(cfg):
    step_arc = cfg.viewsphere.radius_m * np.radians(cfg.viewsphere.step_deg)
    assert effective_steps(step_arc, cfg) == pytest.approx(1.0)
    assert effective_steps(2.5 * step_arc, cfg) == pytest.approx(2.5)


def test_comparison_table_fields(cfg):
    recs = [
        _rec("h3d", travel_m=0.3, decision_time_s=0.02),
        _rec("infogain", travel_m=0.5, decision_time_s=0.08),
    ]
    rows = comparison_table(recs, cfg)
    assert [r["policy"] for r in rows] == ["h3d", "infogain"]
    h3d = rows[0]
    assert h3d["mean_travel_m"] == pytest.approx(0.3)
    assert h3d["mean_effective_steps"] == pytest.approx(effective_steps(0.3, cfg))
    # Per-decision latency: episode total divided by decision count.
    assert h3d["mean_decision_s"] == pytest.approx(0.02 / 2)
    assert "success_rate" in h3d


def test_summarize_policies_mean_steps():
    recs = [
        _rec("a", success=True, success_step=2, steps_used=2),
        _rec("a", success=False, success_step=None, steps_used=6),
        _rec("b", success=True, success_step=1, steps_used=1),
    ]
    rows = {r["policy"]: r for r in summarize_policies(recs, max_steps=6)}
    assert rows["a"]["mean_steps"] == pytest.approx(4.0)
    assert rows["a"]["success_rate"] == pytest.approx(0.5)
    assert rows["b"]["mean_steps"] == pytest.approx(1.0)


def test_run_benchmark_smoke(cfg):
    records = run_benchmark(
        cfg, objects=["prism_6x6x6"], poses_per_object=1, policies=("random", "brick")
    )
    assert len(records) == 2
    assert {r.policy for r in records} == {"random", "brick"}
    assert all(r.config_hash == records[0].config_hash for r in records)


def test_episode_record_round_trip():
    rec = _rec("h3d", decisions=["NE", "Ex2"], unexplored_counts=[100, 60])
    d = rec.to_dict()
    back = EpisodeRecord.from_dict(d)
    assert back == rec
