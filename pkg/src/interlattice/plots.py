"""Chart rendering for reports.

Charts are a convenience view of the delimited reports. They render
through an off-screen :class:`~matplotlib.figure.Figure` into bytes so the
caller decides where they go. Output is deterministic: SVG ids are salted
with a fixed string and timestamps are stripped.
"""

from __future__ import annotations

import io
from collections import OrderedDict
from typing import Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from interlattice.metrics import OrderDecomposition, TrajectoryRecord

CHART_FORMATS = ("svg", "png")
_METADATA = {"svg": {"Date": None, "Creator": None}, "png": {"Software": None}}
_RC = {"svg.hashsalt": "interlattice", "svg.fonttype": "none", "font.size": 9}
COLORS = {"preserve": "#4c72b0", "discard": "#dd8452", "new": "#55a868"}


def trajectory_gid(variant: str) -> str:
    return f"trajectory-{variant}"


def _render(fig: Figure, fmt: str) -> bytes:
    if fmt not in CHART_FORMATS:
        raise ValueError(f"chart format must be one of {CHART_FORMATS}, got {fmt!r}")
    buf = io.BytesIO()
    with matplotlib.rc_context(_RC):
        fig.savefig(buf, format=fmt, metadata=_METADATA[fmt], dpi=120)
    return buf.getvalue()


def trajectory_chart(records: Sequence[TrajectoryRecord], fmt: str = "svg") -> bytes:
    """One line per variant of Jaccard similarity against epoch.

    In SVG output each line sits in a group whose id is
    :func:`trajectory_gid` of its variant.
    """
    series: "OrderedDict[str, list]" = OrderedDict()
    for rec in records:
        series.setdefault(rec.variant, []).append((rec.epoch, rec.similarity))
    if not series:
        raise ValueError("no trajectory records to draw")
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(5.0, 3.4))
        ax = fig.add_subplot()
        for variant, points in series.items():
            points.sort()
            epochs, sims = zip(*points)
            (line,) = ax.plot(epochs, sims, linewidth=1.6, label=variant)
            line.set_gid(trajectory_gid(variant))
        ax.set_xlabel("epoch")
        ax.set_ylabel("Jaccard similarity to final")
        ax.set_ylim(0.0, 1.05)
        ax.grid(alpha=0.3)
        ax.legend(frameon=False)
        fig.tight_layout()
    return _render(fig, fmt)


def decomposition_chart(decomp: OrderDecomposition, fmt: str = "svg") -> bytes:
    """Per-order stacked bars for both sides of the decomposition.

    The left bar of each order stacks preserve and discard (pretrain
    strength), the right bar stacks preserve and new (finetune strength).
    The empty subset is left out: it only carries the baseline output.
    """
    orders = np.arange(1, decomp.n + 1)
    if orders.size == 0:
        raise ValueError("decomposition has no non-empty orders")
    width = 0.38
    left, right = orders - width / 2, orders + width / 2
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(max(4.0, 0.5 * decomp.n + 2.0), 3.4))
        ax = fig.add_subplot()
        p = decomp.preserve[1:]
        ax.bar(left, p, width, color=COLORS["preserve"], label="preserve", gid="bars-preserve-pretrain")
        ax.bar(left, decomp.discard[1:], width, bottom=p, color=COLORS["discard"], label="discard", gid="bars-discard")
        ax.bar(right, p, width, color=COLORS["preserve"], gid="bars-preserve-finetune")
        ax.bar(right, decomp.new[1:], width, bottom=p, color=COLORS["new"], label="new", gid="bars-new")
        ax.set_xticks(orders)
        ax.set_xlabel("order |S|")
        ax.set_ylabel("mean |I(S)|")
        ax.legend(frameon=False)
        fig.tight_layout()
    return _render(fig, fmt)
