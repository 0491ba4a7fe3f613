"""Deterministic artifact writers: CSV tables, JSON manifests, plot outputs.

Floats are serialized with their shortest round-trip representation so that
identical runs produce byte-identical CSVs; wall-clock information never
enters the data files (it goes to a separate run.log).  Every file is
written atomically (temp + rename).  Plot output comes in two forms: a
renderer-agnostic gnuplot-style script next to each CSV, and a rendered PNG.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["fmt", "write_csv", "write_json", "write_text", "write_plot_script", "render_png"]


def fmt(value) -> str:
    """Shortest round-trip decimal form of a scalar."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    v = float(value)
    return repr(v)


def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: list[str], columns: list) -> None:
    """Columns are sequences of equal length; scalars formatted via fmt."""
    path = Path(path)
    n = len(columns[0]) if columns else 0
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(fmt(col[i]) for col in columns))
    _atomic_write(path, "\n".join(lines) + "\n")


class _Encoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, complex):
            return {"re": o.real, "im": o.imag}
        return super().default(o)


def write_json(path, payload: dict) -> None:
    path = Path(path)
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True, cls=_Encoder) + "\n")


def write_text(path, text: str) -> None:
    _atomic_write(Path(path), text)


def write_plot_script(path, csv_name: str, title: str, xlabel: str, ylabel: str,
                      series: list[tuple[int, int, str]], logx: bool = False,
                      logy: bool = False) -> None:
    """Renderer-agnostic plot commands (gnuplot syntax) referencing the CSV.

    series entries are (x_column, y_column, label) with 1-based indices.
    """
    lines = [
        "set datafile separator ','",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set key top right",
    ]
    if logx:
        lines.append("set logscale x")
    if logy:
        lines.append("set logscale y")
    plots = ", ".join(
        f"'{csv_name}' using {xc}:{yc} every ::1 with lines title '{label}'"
        for xc, yc, label in series
    )
    lines.append("plot " + plots)
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def render_png(path, curves: list[tuple[np.ndarray, np.ndarray, str]], title: str,
               xlabel: str, ylabel: str, logx: bool = False, logy: bool = False) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.2), constrained_layout=True)
    for x, y, label in curves:
        ax.plot(x, y, lw=1.2, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(curves) > 1:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=130)
    plt.close(fig)
