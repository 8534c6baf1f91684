"""Artifact writers: JSONL episode logs, CSV tables, and figures.

Report generation is a pure fold over episode records: given the same
records and config, every file here comes out byte-for-byte identical
(timing columns aside, since wall clocks are not reproducible).
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .bench import (
    EpisodeRecord,
    comparison_table,
    difficulty_table,
    success_by_step,
    summarize_policies,
)
from .config import RunConfig, config_hash

__all__ = [
    "write_jsonl",
    "read_jsonl",
    "write_table_csv",
    "plot_success_curves",
    "plot_difficulty",
    "plot_comparison_table",
    "render_report",
]

# Stable styling per policy so regenerated figures do not reshuffle.
_POLICY_STYLE = {
    "random": ("tab:gray", "o"),
    "brick": ("tab:brown", "s"),
    "bfs": ("tab:green", "*"),
    "h2d": ("tab:orange", "^"),
    "h3d": ("tab:blue", "D"),
    "infogain": ("tab:purple", "v"),
    "logreg": ("tab:red", "P"),
    "lda": ("tab:pink", "X"),
    "qnet": ("tab:cyan", "h"),
}
_PNG_META = {"Software": None}  # keep PNG bytes reproducible


def write_jsonl(records, path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), separators=(",", ":")) + "\n")


def read_jsonl(path) -> list[EpisodeRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(EpisodeRecord.from_dict(json.loads(line)))
    return out


def write_table_csv(rows: list[dict], path, cfg_hash: str, seed: int) -> None:
    """CSV with a provenance comment line; column order from the first row."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config={cfg_hash} seed={seed}\n")
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _stamp(fig, cfg_hash: str, seed: int) -> None:
    fig.text(
        0.99, 0.01, f"config {cfg_hash} / seed {seed}",
        ha="right", va="bottom", fontsize=6, color="0.55",
    )


def plot_success_curves(curves: dict[str, np.ndarray], path, cfg_hash: str, seed: int) -> None:
    """Cumulative grasp-success fraction against the view budget."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name in sorted(curves):
        color, marker = _POLICY_STYLE.get(name, ("black", "."))
        steps = np.arange(len(curves[name]))
        ax.plot(steps, curves[name], color=color, marker=marker, label=name)
    ax.set_xlabel("additional views allowed")
    ax.set_ylabel("episodes with a grasp")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    _stamp(fig, cfg_hash, seed)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def plot_difficulty(rows: list[dict], path, cfg_hash: str, seed: int) -> None:
    """Per-object difficulty ratio bars with the band thresholds marked."""
    band_color = {"hard": "tab:red", "medium": "tab:orange", "easy": "tab:green"}
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    names = [r["object"] for r in rows]
    ratios = [r["ratio"] for r in rows]
    colors = [band_color[r["band"]] for r in rows]
    ax.bar(range(len(rows)), ratios, color=colors)
    ax.axhline(0.40, color="0.4", linestyle="--", linewidth=1)
    ax.axhline(0.80, color="0.4", linestyle="--", linewidth=1)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("random / lookahead success at 2 views")
    ax.set_ylim(0, 1.05)
    handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in band_color.values()]
    ax.legend(handles, band_color.keys(), fontsize=8)
    _stamp(fig, cfg_hash, seed)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def plot_comparison_table(rows: list[dict], path, cfg_hash: str, seed: int) -> None:
    """Render the policy comparison as a figure-sized table."""
    cols = ["policy", "episodes", "success_rate", "mean_travel_m", "mean_effective_steps", "mean_decision_s"]
    cells = []
    for r in rows:
        cells.append([
            r["policy"],
            str(r["episodes"]),
            f"{r['success_rate']:.2f}",
            f"{r['mean_travel_m']:.3f}",
            f"{r['mean_effective_steps']:.2f}",
            f"{r['mean_decision_s'] * 1000:.0f} ms",
        ])
    fig, ax = plt.subplots(figsize=(7.0, 1.0 + 0.4 * len(rows)))
    ax.axis("off")
    table = ax.table(cellText=cells, colLabels=cols, loc="center")
    table.auto_set_font_size(False)
    table.set_fontsize(8)
    table.scale(1.0, 1.4)
    _stamp(fig, cfg_hash, seed)
    fig.savefig(path, dpi=120, metadata=_PNG_META, bbox_inches="tight")
    plt.close(fig)


def render_report(records, cfg: RunConfig, out_dir, objects=None) -> dict[str, str]:
    """Write every table and figure derivable from a set of episode records.

    Returns a name -> path map of what was produced. Curves and summaries
    always; the difficulty table when both its reference policies are
    present; the comparison artifacts when an off-lattice policy ran.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = config_hash(cfg)
    seed = cfg.seed
    max_steps = cfg.episode.max_steps
    produced: dict[str, str] = {}

    policies = sorted({r.policy for r in records})
    if objects is None:
        objects = sorted({r.object_name for r in records})

    rows = summarize_policies(records, max_steps)
    write_table_csv(rows, out / "summary.csv", h, seed)
    produced["summary"] = str(out / "summary.csv")

    curves = success_by_step(records, max_steps)
    curve_rows = [
        {"policy": name, **{f"step{k}": round(float(v), 6) for k, v in enumerate(curves[name])}}
        for name in sorted(curves)
    ]
    write_table_csv(curve_rows, out / "success_by_step.csv", h, seed)
    plot_success_curves(curves, out / "success_curves.png", h, seed)
    produced["success_by_step"] = str(out / "success_by_step.csv")
    produced["success_curves"] = str(out / "success_curves.png")

    if "random" in policies and "bfs" in policies:
        diff = difficulty_table(records, objects)
        write_table_csv(diff, out / "difficulty.csv", h, seed)
        plot_difficulty(diff, out / "difficulty.png", h, seed)
        produced["difficulty"] = str(out / "difficulty.csv")
        produced["difficulty_plot"] = str(out / "difficulty.png")

    comp = comparison_table(records, cfg)
    write_table_csv(comp, out / "comparison.csv", h, seed)
    plot_comparison_table(comp, out / "comparison.png", h, seed)
    produced["comparison"] = str(out / "comparison.csv")
    produced["comparison_plot"] = str(out / "comparison.png")
    return produced
