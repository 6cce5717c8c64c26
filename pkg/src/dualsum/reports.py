"""Figure rendering for completed experiment directories.

Consumes only the exported files (records.jsonl, summary.csv, viz.csv,
config.resolved), never live run state, so figures can be regenerated at
any time and by other tooling. All output is PNG next to the data.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import ConfigError

_PROVENANCE_COLORS = {
    "targeted": "tab:red",
    "random": "tab:orange",
    "warmup": "tab:purple",
    "baseline": "tab:green",
}


def _read_summary(out_dir: Path) -> list[dict]:
    path = out_dir / "summary.csv"
    if not path.is_file():
        raise ConfigError(f"summary file not found: {path}")
    with path.open("r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _column(rows: list[dict], name: str) -> tuple[list[int], list[float]]:
    xs, ys = [], []
    for row in rows:
        if row.get(name):
            xs.append(int(row["iteration"]))
            ys.append(float(row[name]))
    return xs, ys


def _strategy_label(out_dir: Path) -> str:
    path = out_dir / "config.resolved"
    if path.is_file():
        with path.open("r", encoding="utf-8") as fh:
            return json.load(fh).get("strategy", out_dir.name)
    return out_dir.name


def render_learning_curves(out_dirs: list[Path], target: Path) -> Path:
    """ROUGE means vs iteration, one line per experiment directory, with a
    shaded +/- std band."""
    fig, axes = plt.subplots(1, 3, figsize=(13, 4), sharex=True)
    metrics = [("rouge1", "ROUGE-1"), ("rouge2", "ROUGE-2"), ("rougeL", "ROUGE-L")]
    for ax, (name, title) in zip(axes, metrics):
        for out_dir in out_dirs:
            rows = _read_summary(out_dir)
            xs, means = _column(rows, f"{name}_mean")
            _, stds = _column(rows, f"{name}_std")
            if not xs:
                continue
            label = _strategy_label(out_dir)
            (line,) = ax.plot(xs, means, marker="o", markersize=3, label=label)
            if len(stds) == len(means):
                lower = [m - s for m, s in zip(means, stds)]
                upper = [m + s for m, s in zip(means, stds)]
                ax.fill_between(xs, lower, upper, alpha=0.15, color=line.get_color())
        ax.set_title(title)
        ax.set_xlabel("iteration")
        ax.grid(True, alpha=0.3)
    axes[0].set_ylabel("mean F1")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)
    return target


def render_embedding_map(out_dir: Path, target: Path) -> Path:
    """Scatter of the 2-D projected pool, selections colored by provenance."""
    path = out_dir / "viz.csv"
    if not path.is_file():
        raise ConfigError(f"viz file not found: {path}")
    groups: dict[str, tuple[list[float], list[float]]] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            xs, ys = groups.setdefault(row["tag"], ([], []))
            xs.append(float(row["x"]))
            ys.append(float(row["y"]))
    fig, ax = plt.subplots(figsize=(6, 5))
    if "unselected" in groups:
        xs, ys = groups["unselected"]
        ax.scatter(xs, ys, s=8, c="lightgray", label="unselected")
    for tag, (xs, ys) in sorted(groups.items()):
        if tag == "unselected":
            continue
        ax.scatter(xs, ys, s=18, c=_PROVENANCE_COLORS.get(tag, "tab:blue"), label=tag)
    ax.set_xlabel("component 1")
    ax.set_ylabel("component 2")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)
    return target


def render_spread_curves(out_dir: Path, target: Path) -> Path:
    """Labeled-set diversity and outlier score vs iteration."""
    rows = _read_summary(out_dir)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for ax, name, title in ((ax1, "diversity", "diversity score"), (ax2, "outlier", "outlier score")):
        xs, means = _column(rows, f"{name}_mean")
        _, stds = _column(rows, f"{name}_std")
        if xs:
            (line,) = ax.plot(xs, means, marker="o", markersize=3)
            if len(stds) == len(means):
                ax.fill_between(
                    xs,
                    [m - s for m, s in zip(means, stds)],
                    [m + s for m, s in zip(means, stds)],
                    alpha=0.15,
                    color=line.get_color(),
                )
        ax.set_title(title)
        ax.set_xlabel("iteration")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)
    return target


def render_timings(out_dir: Path, target: Path) -> Path:
    """Mean selection and training wall time per iteration."""
    rows = _read_summary(out_dir)
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, label in (("selection_time_s", "selection"), ("train_time_s", "training")):
        xs, means = _column(rows, f"{name}_mean")
        if xs:
            ax.plot(xs, means, marker="o", markersize=3, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("seconds")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)
    return target


def render_report(out_dir: str | Path, compare_dirs: list[str | Path] | None = None) -> list[Path]:
    """Render every applicable figure for an experiment directory.

    ``compare_dirs`` adds other experiment directories to the learning
    curves so strategies can be plotted against each other.
    """
    out = Path(out_dir)
    if not out.is_dir():
        raise ConfigError(f"not a directory: {out}")
    curve_dirs = [out] + [Path(d) for d in (compare_dirs or [])]
    written = [render_learning_curves(curve_dirs, out / "learning_curves.png")]
    if (out / "viz.csv").is_file():
        written.append(render_embedding_map(out, out / "embedding_map.png"))
    written.append(render_spread_curves(out, out / "spread_curves.png"))
    written.append(render_timings(out, out / "timings.png"))
    return written
