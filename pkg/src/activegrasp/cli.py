"""Command-line interface.

Subcommands: run a single episode, train learned policies, run the
benchmark suite, run the travel/latency comparison, regenerate reports
from saved records, and dump the active configuration.

Exit codes: 0 on success, 1 when the requested work ran but failed (for
`run`, an episode that ends without a grasp), 2 for usage errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench, report
from .config import RunConfig, config_hash, load_config, save_config
from .meshes import BUNDLED_OBJECTS
from .sim import GraspSimulator

_ENV_OUT = "ACTIVEGRASP_OUT"


def _out_dir(args) -> Path:
    base = args.out or os.environ.get(_ENV_OUT) or "runs"
    p = Path(base)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_cfg(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg = RunConfig(**{**cfg.__dict__, "seed": args.seed})
    return cfg


def _parse_objects(spec: str | None) -> list[str]:
    if not spec or spec == "all":
        return list(BUNDLED_OBJECTS)
    return [s.strip() for s in spec.split(",") if s.strip()]


def _parse_models(pairs) -> dict[str, str]:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ValueError(f"--model expects NAME=PATH, got {pair!r}")
        name, path = pair.split("=", 1)
        out[name] = path
    return out


def _write_xyz(points: np.ndarray, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in points:
            fh.write(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f}\n")


def _cmd_run(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    models = _parse_models(args.model)
    resolved, manifests = bench._resolve_policies([args.policy], models)
    bench._check_train_test([args.object], {args.policy: manifests[args.policy]})
    sim = GraspSimulator(args.object, args.rotation, cfg)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0, 0, 0]))

    on_step = None
    if args.dump_clouds:
        cloud_dir = out / "clouds"
        cloud_dir.mkdir(parents=True, exist_ok=True)
        step_counter = {"i": 0}

        def on_step(session):
            i = step_counter["i"]
            _write_xyz(session.model.object_points, cloud_dir / f"step{i:02d}_object.xyz")
            _write_xyz(
                session.model.unexplored.unexplored_points(),
                cloud_dir / f"step{i:02d}_unexplored.xyz",
            )
            step_counter["i"] += 1

    rec = bench.run_episode(sim, args.policy, resolved[args.policy], rng, cfg.seed, on_step=on_step)
    with open(out / "episode.json", "w", encoding="utf-8") as fh:
        json.dump(rec.to_dict(), fh, indent=2)
    status = "grasp found" if rec.success else f"no grasp ({rec.failure_cause})"
    print(f"[{config_hash(cfg)}] {args.object} rot={args.rotation:.0f} policy={args.policy}: "
          f"{status} after {rec.steps_used} step(s), travel {rec.travel_m:.3f} m")
    if rec.success:
        print(f"  quality {rec.grasp_quality_deg:.1f} deg, width {rec.grasp_width_m * 1000:.1f} mm")
    print(f"  wrote {out / 'episode.json'}")
    return 0 if rec.success else 1


def _cmd_train(args) -> int:
    from .ml import generate_direction_dataset, pca_fit, pca_transform, train_q
    from .ml.linear import LDAClassifier, LogisticClassifier
    from .ml.policy import save_classifier, save_qnet

    cfg = _load_cfg(args)
    out = _out_dir(args)
    if args.objects:
        objects = _parse_objects(args.objects)
    elif args.kind == "qnet":
        objects = list(BUNDLED_OBJECTS)
    else:
        objects = ["prism_10x7x4", "prism_20x6x5"]
    h = config_hash(cfg)
    meta = {"objects": objects, "seed": cfg.seed, "config": h}
    metrics: dict = {"kind": args.kind, "objects": objects, "config": h, "seed": cfg.seed}
    model_path = out / f"model_{args.kind}.bin"

    if args.kind in ("logreg", "lda"):
        def progress(done, total, kept):
            if done % 10 == 0 or done == total:
                print(f"  dataset {done}/{total} poses, {kept} labeled", flush=True)

        X, y, dmeta = generate_direction_dataset(
            cfg, objects, poses_per_object=args.poses, seed=cfg.seed, progress=progress
        )
        if len(y) < 10:
            raise ValueError(f"dataset too small ({len(y)} samples); raise --poses")
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 71]))
        perm = rng.permutation(len(y))
        cut = max(1, int(0.8 * len(y)))
        tr, ho = perm[:cut], perm[cut:]
        pca = pca_fit(X[tr], cfg.ml.pca_components)
        Ztr, Zho = pca_transform(pca, X[tr]), pca_transform(pca, X[ho])
        if args.kind == "logreg":
            clf = LogisticClassifier(8).fit(
                Ztr, y[tr], cfg.ml.logreg_iterations, cfg.ml.logreg_lr, cfg.ml.logreg_l2
            )
        else:
            clf = LDAClassifier(8, cfg.ml.lda_ridge).fit(Ztr, y[tr])
        acc = float(np.mean(clf.predict(Zho) == y[ho])) if len(ho) else float("nan")
        save_classifier(model_path, pca, clf, {**meta, **dmeta})
        metrics.update({"samples": int(len(y)), "holdout_accuracy": acc})
        print(f"trained {args.kind} on {len(tr)} samples; holdout accuracy {acc:.3f}")
    elif args.kind == "qnet":
        def qprogress(ep, total, history):
            if ep % 10 == 0 or ep == total:
                recent = history["steps"][-10:]
                print(f"  episode {ep}/{total}, recent mean steps {np.mean(recent):.2f}", flush=True)

        net, history = train_q(cfg, objects, seed=cfg.seed, episodes=args.episodes, progress=qprogress)
        save_qnet(model_path, net, meta)
        first = history["steps"][:50]
        last = history["steps"][-50:]
        metrics.update(
            {
                "episodes": len(history["steps"]),
                "mean_steps_first50": float(np.mean(first)),
                "mean_steps_last50": float(np.mean(last)),
                "success_rate": float(np.mean(history["success"])),
            }
        )
        print(
            f"trained qnet for {len(history['steps'])} episodes; "
            f"steps first50 {metrics['mean_steps_first50']:.2f} -> last50 {metrics['mean_steps_last50']:.2f}"
        )
    else:
        raise ValueError(f"unknown training kind {args.kind!r}")

    with open(out / f"train_{args.kind}.json", "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2)
    print(f"  wrote {model_path}")
    return 0


def _run_suite(args, policies) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    objects = _parse_objects(args.objects)
    models = _parse_models(getattr(args, "model", None))

    def progress(done, total):
        print(f"  unit {done}/{total}", flush=True)

    records = bench.run_benchmark(
        cfg,
        objects=objects,
        poses_per_object=args.poses,
        policies=policies,
        model_paths=models,
        jobs=args.jobs,
        progress=progress if args.verbose else None,
    )
    report.write_jsonl(records, out / "episodes.jsonl")
    produced = report.render_report(records, cfg, out, objects=objects)
    print(f"[{config_hash(cfg)}] {len(records)} episodes over {len(objects)} objects")
    for row in bench.summarize_policies(records, cfg.episode.max_steps):
        print(
            f"  {row['policy']:>8}: success {row['success_rate']:.2f}, "
            f"mean steps {row['mean_steps']:.2f}, travel {row['mean_travel_m']:.3f} m, "
            f"decision {row['mean_decision_s'] * 1000:.0f} ms"
        )
    for name, path in sorted(produced.items()):
        print(f"  wrote {path}")
    return 0


def _cmd_benchmark(args) -> int:
    policies = (
        [s.strip() for s in args.policies.split(",") if s.strip()]
        if args.policies
        else list(bench.DEFAULT_POLICIES)
    )
    return _run_suite(args, policies)


def _cmd_compare(args) -> int:
    return _run_suite(args, list(bench.COMPARE_POLICIES))


def _cmd_report(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    records = report.read_jsonl(args.records)
    produced = report.render_report(records, cfg, out)
    for name, path in sorted(produced.items()):
        print(f"wrote {path}")
    return 0


def _cmd_config(args) -> int:
    import yaml

    from .config import config_to_dict

    cfg = _load_cfg(args)
    if args.dump:
        save_config(cfg, args.dump)
        print(f"wrote {args.dump}")
    else:
        sys.stdout.write(yaml.safe_dump(config_to_dict(cfg), sort_keys=True))
    print(f"# hash: {config_hash(cfg)}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="activegrasp",
        description="Viewpoint planning and grasp synthesis benchmark on a simulated tabletop",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_default=None):
        sp.add_argument("--config", help="YAML config file (defaults apply otherwise)")
        sp.add_argument("--seed", type=int, default=seed_default, help="master seed override")
        sp.add_argument("--out", help=f"output directory (or ${_ENV_OUT}, default ./runs)")

    sp = sub.add_parser("run", help="run one exploration episode")
    sp.add_argument("--object", required=True, help="bundled object name or .obj path")
    sp.add_argument("--rotation", type=float, default=0.0, help="object z rotation in degrees")
    sp.add_argument("--policy", default="h3d")
    sp.add_argument("--model", action="append", help="NAME=PATH for learned policies")
    sp.add_argument("--dump-clouds", action="store_true", help="write per-step xyz clouds")
    common(sp)
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("train", help="train a learned policy")
    sp.add_argument("--kind", required=True, choices=["logreg", "lda", "qnet"])
    sp.add_argument("--objects", help="comma-separated object names")
    sp.add_argument("--poses", type=int, default=None, help="dataset poses per object")
    sp.add_argument("--episodes", type=int, default=None, help="qnet training episodes")
    common(sp)
    sp.set_defaults(func=_cmd_train)

    sp = sub.add_parser("benchmark", help="run the policy suite")
    sp.add_argument("--objects", help="comma-separated names or 'all'")
    sp.add_argument("--poses", type=int, default=20, help="rotations per object")
    sp.add_argument("--policies", help="comma-separated policy names")
    sp.add_argument("--model", action="append", help="NAME=PATH for learned policies")
    sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    sp.add_argument("--verbose", action="store_true")
    common(sp)
    sp.set_defaults(func=_cmd_benchmark)

    sp = sub.add_parser("compare", help="travel/latency comparison of local vs global planning")
    sp.add_argument("--objects", help="comma-separated names or 'all'")
    sp.add_argument("--poses", type=int, default=9, help="rotations per object")
    sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    sp.add_argument("--verbose", action="store_true")
    common(sp)
    sp.set_defaults(func=_cmd_compare)

    sp = sub.add_parser("report", help="regenerate tables and figures from saved records")
    sp.add_argument("--records", required=True, help="episodes.jsonl path")
    common(sp)
    sp.set_defaults(func=_cmd_report)

    sp = sub.add_parser("config", help="print or write the active configuration")
    sp.add_argument("--dump", help="write YAML to this path instead of stdout")
    common(sp)
    sp.set_defaults(func=_cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (KeyError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and signal failure
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
