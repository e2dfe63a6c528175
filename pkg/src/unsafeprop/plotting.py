"""Figures for the metrics report.

Uses the object-oriented matplotlib API with an Agg canvas so nothing touches
pyplot's global state, and strips PNG metadata so output is byte-stable.
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .analysis import ABI_BINS, AbiCensus
from .metrics import CdfSeries

STYLE = {
    "figsize": (5.0, 3.2),
    "dpi": 120,
    "colors": ("black", "0.55", "0.8"),
}


def _new_figure():
    fig = Figure(figsize=STYLE["figsize"], dpi=STYLE["dpi"])
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(1, 1, 1)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    return fig, ax


def _save(fig: Figure, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    return path


def plot_cdf(series: Mapping[str, CdfSeries], path: str | Path, xlabel: str,
             title: str = "") -> Path:
    """Step plot of one or more cumulative distributions."""
    fig, ax = _new_figure()
    for (label, s), color in zip(series.items(), STYLE["colors"]):
        if not s.points:
            continue
        xs = [v for v, _ in s.points]
        ys = [float(p) for _, p in s.points]
        ax.step(xs, ys, where="post", color=color, label=label)
        ax.plot(xs, ys, "o", color=color, markersize=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("packages (cumulative %)")
    ax.set_ylim(0, 105)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(frameon=False)
    return _save(fig, Path(path))


def plot_abi_distribution(census: AbiCensus, path: str | Path) -> Path:
    fig, ax = _new_figure()
    pcts = census.percentages()
    ax.bar(list(ABI_BINS), [float(pcts[b]) for b in ABI_BINS], color=STYLE["colors"][0])
    ax.set_ylabel("calls of declared-unsafe functions (%)")
    ax.set_ylim(0, 100)
    return _save(fig, Path(path))
