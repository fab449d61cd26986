"""Partition diagrams for two-reference sweeps.

Each panel is the unit square of fidelities with the first reference on the
horizontal axis and the second on the vertical axis. Dashed lines mark the
thresholds, the concluded segment is shaded, and an optional point shows
fidelity estimates for the measured state.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .membership import MembershipDecision, Side  # noqa: E402

VERDICT_COLOR = "#9ecae1"
POINT_COLOR = "#d62728"
HATCH_COLOR = "#3182bd"


def _cell(eps_x: float, eps_y: float, segment) -> tuple[float, float, float, float]:
    x0, x1 = (eps_x, 1.0) if segment[0] is Side.AT_LEAST else (0.0, eps_x)
    y0, y1 = (eps_y, 1.0) if segment[1] is Side.AT_LEAST else (0.0, eps_y)
    return x0, y0, x1 - x0, y1 - y0


def draw_panel(ax, decision: MembershipDecision, point: tuple[float, float] | None = None,
               title: str = "") -> None:
    refs = decision.partition.refs
    if len(refs) != 2:
        raise ValueError("partition diagrams need exactly two references")
    ex, ey = refs[0].epsilon, refs[1].epsilon
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    if decision.verdict is not None:
        x, y, w, h = _cell(ex, ey, decision.verdict)
        ax.add_patch(Rectangle((x, y), w, h, facecolor=VERDICT_COLOR, edgecolor=HATCH_COLOR,
                               linewidth=0, hatch=".."))
    else:
        ax.text(0.5, 0.5, "inconclusive", ha="center", va="center", fontsize=9)
    ax.axvline(ex, color="k", linestyle="--", linewidth=1)
    ax.axhline(ey, color="k", linestyle="--", linewidth=1)
    if point is not None:
        ax.plot(*point, "o", color=POINT_COLOR, markersize=4)
    ax.set_xlabel(f"F({refs[0].name})")
    ax.set_ylabel(f"F({refs[1].name})")
    ax.set_title(title or f"({ex:g}, {ey:g})", fontsize=9)


def render_sweep(decisions: Sequence[MembershipDecision], path, point=None,
                 columns: int = 4) -> Path:
    """Save one panel per decision to ``path``; the format follows the suffix."""
    if not decisions:
        raise ValueError("nothing to draw")
    path = Path(path)
    cols = min(columns, len(decisions))
    rows = math.ceil(len(decisions) / cols)
    with plt.rc_context({"svg.hashsalt": "memberscope"}):
        fig, axes = plt.subplots(rows, cols, figsize=(2.6 * cols, 2.6 * rows), squeeze=False)
        for ax, decision in zip(axes.flat, decisions):
            draw_panel(ax, decision, point)
        for ax in list(axes.flat)[len(decisions):]:
            ax.set_visible(False)
        fig.tight_layout()
        # no timestamps so repeated runs give identical files
        metadata = {"Date": None} if path.suffix.lower() in (".svg", ".pdf") else {}
        fig.savefig(path, metadata=metadata)
        plt.close(fig)
    return path
