"""Render the four figure kinds from fedsim CSV outputs.

Every renderer is a pure function of the input CSVs: fixed figure size,
fixed fonts, colors keyed by strategy name, and no timestamps in the
output file, so rendering the same inputs twice gives identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("curves", "bias", "contribution", "sweep")

FIGSIZE = (9.0, 4.0)
DPI = 110

# stable palette; unknown strategies fall back on a name-ordered cycle
STRATEGY_COLORS = {
    "fedar": "#C44E52",
    "fedavg": "#4C72B0",
    "fedavg_is": "#55A868",
    "fedavg_s": "#8172B2",
    "mifa": "#CCB974",
    "fedvarp": "#64B5CD",
    "scaffold": "#937860",
}
FALLBACK_COLORS = ("#1F77B4", "#FF7F0E", "#2CA02C", "#D62728", "#9467BD", "#8C564B")


class PlotError(Exception):
    """Base error for rendering failures."""


class SchemaError(PlotError):
    """An input CSV is missing a required column."""


class EmptyDataError(PlotError):
    """The input parses but contains no data to plot."""


@dataclass(frozen=True)
class PlotJob:
    kind: str  # curves | bias | contribution | sweep
    input_dir: Path
    output_path: Path


def _read_csv(path: Path, required: tuple) -> list[dict]:
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = set(required) - set(reader.fieldnames or ())
        if missing:
            raise SchemaError(f"{path}: missing columns {sorted(missing)}")
        rows = [row for row in reader if any(v.strip() for v in row.values() if v)]
    if not rows:
        raise EmptyDataError(f"{path}: no data rows")
    return rows


def _color_for(strategy: str, fallback_index: int) -> str:
    return STRATEGY_COLORS.get(
        strategy, FALLBACK_COLORS[fallback_index % len(FALLBACK_COLORS)]
    )


def _strategy_label(run_dir: Path) -> str:
    echo = run_dir / "config.echo.json"
    if echo.exists():
        try:
            return json.loads(echo.read_text())["strategy"]
        except (json.JSONDecodeError, KeyError):
            pass
    return run_dir.name


def _run_dirs(input_dir: Path) -> list[Path]:
    """A run dir itself, or every child dir that carries a rounds.csv."""
    if (input_dir / "rounds.csv").exists():
        return [input_dir]
    children = sorted(d for d in input_dir.iterdir()
                      if d.is_dir() and (d / "rounds.csv").exists())
    if not children:
        raise EmptyDataError(f"{input_dir}: no rounds.csv found in it or its children")
    return children


def _new_figure(n_axes: int):
    fig, axes = plt.subplots(1, n_axes, figsize=FIGSIZE, dpi=DPI)
    if n_axes == 1:
        axes = [axes]
    return fig, axes


def _save(fig, output_path: Path) -> None:
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output_path, format="png", metadata={"Software": None})
    plt.close(fig)


def render_curves(input_dir: Path, output_path: Path) -> None:
    """Training-loss and test-accuracy curves, one series per run."""
    fig, (ax_loss, ax_acc) = _new_figure(2)
    for idx, run_dir in enumerate(_run_dirs(input_dir)):
        rows = _read_csv(run_dir / "rounds.csv",
                         ("round", "global_train_loss", "global_test_accuracy"))
        rounds = [int(r["round"]) for r in rows]
        label = _strategy_label(run_dir)
        color = _color_for(label, idx)
        ax_loss.plot(rounds, [float(r["global_train_loss"]) for r in rows],
                     label=label, color=color, linewidth=1.4)
        ax_acc.plot(rounds, [float(r["global_test_accuracy"]) for r in rows],
                    label=label, color=color, linewidth=1.4)
    ax_loss.set_xlabel("round")
    ax_loss.set_ylabel("training loss")
    ax_acc.set_xlabel("round")
    ax_acc.set_ylabel("test accuracy")
    ax_acc.set_ylim(0.0, 1.0)
    for ax in (ax_loss, ax_acc):
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, output_path)


def _silverman_bandwidth(values: np.ndarray) -> float:
    sigma = float(np.std(values))
    q75, q25 = np.percentile(values, [75, 25])
    floor = 1e-9
    scales = [s for s in (sigma, (q75 - q25) / 1.34) if s > floor]
    if not scales:
        return 0.05
    return 0.9 * min(scales) * len(values) ** (-0.2)


def render_bias(input_dir: Path, output_path: Path) -> None:
    """Per-client accuracy histogram over [0, 1] with a density overlay."""
    source = input_dir / "bias.csv"
    if not source.exists():
        source = input_dir / "per_client.csv"
    rows = _read_csv(source, ("client", "accuracy"))
    acc = np.array([float(r["accuracy"]) for r in rows])

    fig, (ax,) = _new_figure(1)
    edges = np.linspace(0.0, 1.0, 21)
    ax.hist(acc, bins=edges, color="#4C72B0", alpha=0.55, edgecolor="white",
            label="clients")
    h = _silverman_bandwidth(acc)
    grid = np.linspace(min(0.0, acc.min() - 4 * h), max(1.0, acc.max() + 4 * h), 201)
    z = (grid[:, None] - acc[None, :]) / h
    density = np.exp(-0.5 * z * z).mean(axis=1) / (h * math.sqrt(2 * math.pi))
    # scale the density to histogram counts for a shared axis
    bin_width = edges[1] - edges[0]
    ax.plot(grid, density * len(acc) * bin_width, color="#C44E52", linewidth=1.6,
            label="density")
    ax.set_xlabel("per-client accuracy")
    ax.set_ylabel("number of clients")
    ax.set_xlim(0.0, 1.0)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, output_path)


def render_contribution(input_dir: Path, output_path: Path) -> None:
    """Grouped bars per staleness level: stale client vs the rest."""
    rows = _read_csv(input_dir / "shapley.csv", ("level", "client", "phi", "percent"))
    levels = sorted({int(r["level"]) for r in rows})
    stale_pct, rest_pct = [], []
    for level in levels:
        level_rows = [r for r in rows if int(r["level"]) == level]
        stale = sum(float(r["percent"]) for r in level_rows if int(r["client"]) == 0)
        rest = sum(float(r["percent"]) for r in level_rows if int(r["client"]) != 0)
        stale_pct.append(stale)
        rest_pct.append(rest)

    fig, (ax,) = _new_figure(1)
    x = np.arange(len(levels), dtype=float)
    width = 0.38
    ax.bar(x - width / 2, stale_pct, width, color="#777777", label="client 0")
    ax.bar(x + width / 2, rest_pct, width, color="#4C72B0", label="clients 1..N")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(x)
    ax.set_xticklabels(["fresh" if lv == 0 else f"stale {lv}" for lv in levels],
                       fontsize=8)
    ax.set_ylabel("contribution (%)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    _save(fig, output_path)


def render_sweep(input_dir: Path, output_path: Path) -> None:
    """Mean final loss and accuracy against the swept axis, per strategy."""
    rows = _read_csv(
        input_dir / "sweep_summary.csv",
        ("axis", "value", "strategy", "mean_final_train_loss",
         "mean_final_test_accuracy"),
    )
    axis_name = rows[0]["axis"]
    strategies = sorted({r["strategy"] for r in rows})

    fig, (ax_loss, ax_acc) = _new_figure(2)
    for idx, strategy in enumerate(strategies):
        mine = sorted(
            (float(r["value"]), float(r["mean_final_train_loss"]),
             float(r["mean_final_test_accuracy"]))
            for r in rows if r["strategy"] == strategy
        )
        xs = [m[0] for m in mine]
        color = _color_for(strategy, idx)
        ax_loss.plot(xs, [m[1] for m in mine], marker="o", label=strategy, color=color)
        ax_acc.plot(xs, [m[2] for m in mine], marker="o", label=strategy, color=color)
    ax_loss.set_xlabel(axis_name)
    ax_loss.set_ylabel("mean final training loss")
    ax_acc.set_xlabel(axis_name)
    ax_acc.set_ylabel("mean final test accuracy")
    for ax in (ax_loss, ax_acc):
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, output_path)


_RENDERERS = {
    "curves": render_curves,
    "bias": render_bias,
    "contribution": render_contribution,
    "sweep": render_sweep,
}


def render(job: PlotJob) -> Path:
    """Render one job; returns the output path."""
    if job.kind not in _RENDERERS:
        raise PlotError(f"unknown plot kind {job.kind!r}; choose from {KINDS}")
    _RENDERERS[job.kind](Path(job.input_dir), Path(job.output_path))
    return Path(job.output_path)
