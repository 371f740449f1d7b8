"""Deterministic SVG rendering of sweep curves.

Figures are drawn through an explicit matplotlib canvas (no global pyplot
state) with a pinned hash salt and no creation date, so identical series
yield byte-identical documents across runs and processes.
"""

from __future__ import annotations

import io
import math
import os
import tempfile
from pathlib import Path

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

_SVG_RC = {
    "svg.hashsalt": "heraldlab",
    "svg.fonttype": "path",
    "path.simplify": False,
    "font.family": "DejaVu Sans",
}

_DEF_STYLE = {
    "title": "",
    "xlabel": "x",
    "ylabel": "y",
    "figsize": (6.4, 4.2),
    "marker": "o",
    "grid": True,
    "ylog": False,
}


def _check_series(series) -> list[tuple[list[float], list[float], str]]:
    if not series:
        raise ValueError("no series to render")
    cleaned = []
    for idx, (xs, ys, label) in enumerate(series):
        xs = [float(v) for v in xs]
        ys = [float(v) for v in ys]
        if not xs or not ys:
            raise ValueError(f"series {label or idx} is empty")
        if len(xs) != len(ys):
            raise ValueError(f"series {label or idx} has mismatched lengths")
        if any(math.isnan(v) for v in xs + ys):
            raise ValueError(f"series {label or idx} contains NaN")
        cleaned.append((xs, ys, str(label)))
    return cleaned


def render_svg(series, style: dict | None = None) -> bytes:
    """Render [(xs, ys, label), ...] to a self-contained SVG document."""
    cleaned = _check_series(series)
    opts = dict(_DEF_STYLE)
    opts.update(style or {})
    with matplotlib.rc_context(_SVG_RC):
        fig = Figure(figsize=opts["figsize"])
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(111)
        for xs, ys, label in cleaned:
            ax.plot(xs, ys, marker=opts["marker"], label=label)
        if opts["ylog"]:
            ax.set_yscale("log")
        ax.set_xlabel(opts["xlabel"])
        ax.set_ylabel(opts["ylabel"])
        if opts["title"]:
            ax.set_title(opts["title"])
        if opts["grid"]:
            ax.grid(True, alpha=0.3)
        if any(label for _, _, label in cleaned):
            ax.legend(loc="best")
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def write_atomic(path, data: bytes | str) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_svg(path, series, style: dict | None = None) -> None:
    write_atomic(path, render_svg(series, style))
