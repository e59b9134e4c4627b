"""Matplotlib defaults for report figures.

SVG output is made byte-stable: fixed hash salt, no creation date, and text
kept as <text> elements so labels stay searchable.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

PANEL_PT = (800, 600)

COLORS = {
    "M": "#f28e2b",  # orange
    "F": "#76b7e5",  # light blue
    "overall": "#2ca02c",
    "neutral": "#8c8c8c",
}

RC = {
    "svg.hashsalt": "flab",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 16,
    "axes.titlesize": 18,
    "axes.labelsize": 16,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
    "legend.fontsize": 13,
    "lines.linewidth": 2.0,
    "xtick.labelsize": 13,
    "ytick.labelsize": 13,
}


def new_panel():
    """One 800x600 pt canvas."""
    fig, ax = plt.subplots(figsize=(PANEL_PT[0] / 72, PANEL_PT[1] / 72))
    return fig, ax


def to_svg(fig) -> str:
    import io

    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
