"""Figure rendering for the report commands.

Renderers take plain numbers, draw with the object-oriented matplotlib API
(no pyplot state) and save to the given path; the file suffix picks the
format. SVG output is deterministic: no timestamp, fixed id salt.
"""

from __future__ import annotations

import functools
import math
from typing import Mapping, Sequence

import matplotlib
from matplotlib.figure import Figure

matplotlib.rcParams["svg.hashsalt"] = "morphdiv"

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "axes.linewidth": 0.6,
}

# matches the category colours used in the alignment figures: o2o blue, deletions green, insertions red
CATEGORY_COLORS = {"o2o": "tab:blue", "o2o_conv": "tab:blue", "o2o_div": "tab:orange",
                   "src2null": "tab:green", "null": "tab:green", "null2tgt": "tab:red",
                   "other": "tab:gray", "others": "tab:gray"}

FIGSIZE = (5.0, 3.5)
AXES_RECT = (0.14, 0.15, 0.8, 0.75)


def _styled(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        with matplotlib.rc_context(STYLE):
            return func(*args, **kwargs)
    return wrapper


def _figure(figsize=FIGSIZE, rect=AXES_RECT):
    fig = Figure(figsize=figsize)
    ax = fig.add_axes(rect)
    return fig, ax


def _save(fig, path):
    if path is not None:
        fmt = str(path).rsplit(".", 1)[-1].lower()
        meta = {"Date": None} if fmt == "svg" else None
        fig.savefig(path, metadata=meta)
    return fig


@_styled
def scatter(path, x: Sequence[float], y: Sequence[float], xlabel="", ylabel="", title="",
            fit=None, highlight: Mapping[str, tuple[float, float]] | None = None,
            xlim=None, ylim=None):
    """Point cloud; ``fit`` is an optional callable drawn as a curve over the x range."""
    fig, ax = _figure()
    ax.plot(list(x), list(y), "o", ms=3, alpha=0.7, color="tab:blue", gid="points", linestyle="none")
    if fit is not None and len(x):
        lo, hi = min(x), max(x)
        xs = [lo + (hi - lo) * i / 100 for i in range(101)]
        ax.plot(xs, [float(fit(v)) for v in xs], "-", color="black", lw=1, gid="fit")
    for label, (hx, hy) in (highlight or {}).items():
        ax.plot([hx], [hy], "o", color="black", ms=4)
        ax.annotate(label, (hx, hy), fontsize=6, xytext=(3, 3), textcoords="offset points")
    if xlim:
        ax.set_xlim(*xlim)
    if ylim:
        ax.set_ylim(*ylim)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return _save(fig, path)


@_styled
def stacked_histogram(path, groups: Mapping[str, Sequence[float]], bins: int = 20, xlabel="",
                      ylabel="patterns", title=""):
    fig, ax = _figure()
    names = [k for k, v in groups.items() if len(v)]
    if names:
        ax.hist([list(groups[k]) for k in names], bins=bins, stacked=True, label=names)
        ax.legend(frameon=False)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return _save(fig, path)


@_styled
def stacked_bar(path, categories: Sequence[str], stacks: Mapping[str, Sequence[float]], ylabel="%",
                title="", horizontal: bool = False):
    """One bar per category; ``stacks`` maps a segment name to its height in each bar."""
    # long pattern labels need room on the left of horizontal bars
    fig, ax = _figure(rect=(0.38, 0.12, 0.58, 0.74) if horizontal else (0.14, 0.25, 0.8, 0.62))
    bottoms = [0.0] * len(categories)
    pos = list(range(len(categories)))
    for name, heights in stacks.items():
        heights = list(heights)
        color = CATEGORY_COLORS.get(name)
        if horizontal:
            ax.barh(pos, heights, left=bottoms, label=name, color=color, gid=f"bar-{name}")
        else:
            ax.bar(pos, heights, bottom=bottoms, label=name, color=color, gid=f"bar-{name}")
        bottoms = [b + h for b, h in zip(bottoms, heights)]
    if horizontal:
        ax.set_yticks(pos, list(categories), fontsize=6)
        ax.set_xlabel(ylabel)
    else:
        ax.set_xticks(pos, list(categories), rotation=30, ha="right", fontsize=6)
        ax.set_ylabel(ylabel)
    if stacks:
        ax.legend(frameon=False, fontsize=6, ncol=len(stacks), loc="lower left", bbox_to_anchor=(0, 1.0))
    ax.set_title(title, pad=16)
    return _save(fig, path)


@_styled
def density_curves(path, curves: Mapping[str, tuple[Sequence[float], Sequence[float]]], xlabel="",
                   title="", point_masses: Mapping[str, float] | None = None):
    fig, ax = _figure()
    for name, (xs, ys) in curves.items():
        ax.plot(list(xs), list(ys), label=name)
    for name, v in (point_masses or {}).items():
        ax.axvline(v, linestyle="--", color="gray", label=f"{name} (point mass)")
    ax.axvline(0, color="black", lw=0.5)
    if curves or point_masses:
        ax.legend(frameon=False)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("density")
    ax.set_title(title)
    return _save(fig, path)


@_styled
def binned_line(path, series: Mapping[str, Sequence[tuple[float, float, int, float | None, float | None]]],
                xlabel="log10 source pattern frequency", ylabel="Wasserstein distance", title=""):
    """Bin means as lines with shaded 95% intervals; rows are (lo, hi, n, mean, half_width)."""
    fig, ax = _figure()
    drawn = False
    for name, rows in series.items():
        pts = [((lo + hi) / 2, m, hw or 0.0) for lo, hi, n, m, hw in rows if m is not None]
        if not pts:
            continue
        xs = [p[0] for p in pts]
        ms = [p[1] for p in pts]
        ax.plot(xs, ms, marker="o", ms=3, label=name)
        ax.fill_between(xs, [m - h for _, m, h in pts], [m + h for _, m, h in pts], alpha=0.25)
        drawn = True
    if drawn:
        ax.legend(frameon=False)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return _save(fig, path)


def finite(values):
    return [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
