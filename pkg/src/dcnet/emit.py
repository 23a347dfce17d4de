"""Deterministic CSV / JSON / SVG output."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .dynamics import Trajectory

PALETTES = {
    # value 0 -> first colour, value max -> second colour, linear in RGB
    "blues": ((247, 251, 255), (8, 48, 107)),
    "gray": ((255, 255, 255), (0, 0, 0)),
    "heat": ((0, 0, 0), (255, 200, 0)),
}


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def __post_init__(self):
        self.columns = list(self.columns)
        self.rows = [list(r) for r in self.rows]
        for i, r in enumerate(self.rows):
            if len(r) != len(self.columns):
                raise ValueError(f"row {i} has {len(r)} cells, expected {len(self.columns)}")


def _cell(x) -> Any:
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if x is None or isinstance(x, str):
        return x
    raise TypeError(f"unsupported cell type {type(x).__name__}")


def _csv_cell(x) -> str:
    x = _cell(x)
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def emit_table(table: ResultTable, dialect: str = "csv") -> str:
    if dialect == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for r in table.rows:
            w.writerow([_csv_cell(x) for x in r])
        return buf.getvalue()
    if dialect == "json":
        objs = [dict(zip(table.columns, map(_cell, r))) for r in table.rows]
        return json.dumps(objs, indent=1, allow_nan=False) + "\n"
    raise ValueError(f"unknown dialect {dialect!r}")


def trajectory_table(traj: Trajectory) -> ResultTable:
    labels = traj.labels or tuple(f"m{j + 1}" for j in range(traj.amplitudes.shape[1]))
    cols = ["t"] + [f"{p}_{l}" for l in labels for p in ("re", "im")]
    rows = []
    for t, a in zip(traj.times, traj.amplitudes):
        row = [float(t)]
        for z in a:
            row += [float(z.real), float(z.imag)]
        rows.append(row)
    return ResultTable(cols, rows)


def amplitude_table(labels: Sequence[str], amplitudes) -> ResultTable:
    a = np.asarray(amplitudes, dtype=complex)
    return ResultTable(["label", "re", "im", "abs"],
                       [[l, float(z.real), float(z.imag), float(abs(z))] for l, z in zip(labels, a)])


def _fmt(x: float) -> str:
    s = f"{x:.4f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _color(frac: float, palette: str) -> str:
    lo, hi = PALETTES[palette]
    rgb = [round(a + (b - a) * frac) for a, b in zip(lo, hi)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def render_heatmap(values, positions, palette: str = "blues", title: str | None = None) -> str:
    """Standalone SVG with one square per mode, shaded by ``|value|``.

    Fill is linear in ``|value| / max|value|`` between the two palette
    colours; a ten-step scale bar from 0 to the maximum is drawn on the right.
    """
    v = np.abs(np.asarray(values, dtype=complex).reshape(-1))
    if positions is None:
        raise ValueError("heatmap needs mode positions")
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    if pos.shape[0] != v.size:
        raise ValueError("one position per value is required")
    if not np.all(np.isfinite(pos)):
        raise ValueError("positions must be finite")
    if palette not in PALETTES:
        raise ValueError(f"unknown palette {palette!r}")
    if v.size > 1:
        d = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
        d[np.diag_indices_from(d)] = np.inf
        pitch = float(d.min()) or 1.0
    else:
        pitch = 1.0
    unit = 40.0 / pitch
    cell = 0.9 * pitch * unit
    xy = (pos - pos.min(axis=0)) * unit + 10 + cell / 2
    width = float(xy[:, 0].max() + cell / 2 + 80)
    height = float(max(xy[:, 1].max() + cell / 2 + 10, 150))
    vmax = float(v.max()) if v.size else 0.0

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">'
    ]
    if title:
        out.append(f"<title>{title}</title>")
    for (x, y), val in zip(xy, v):
        frac = val / vmax if vmax > 0 else 0.0
        out.append(f'<rect class="mode" x="{_fmt(x - cell / 2)}" y="{_fmt(y - cell / 2)}" '
                   f'width="{_fmt(cell)}" height="{_fmt(cell)}" fill="{_color(frac, palette)}"/>')
    bx = float(xy[:, 0].max() + cell / 2 + 20)
    for k in range(10):
        out.append(f'<rect class="scale" x="{_fmt(bx)}" y="{_fmt(10 + 12 * (9 - k))}" width="14" height="12" '
                   f'fill="{_color((k + 0.5) / 10, palette)}"/>')
    out.append(f'<text x="{_fmt(bx + 18)}" y="20" font-size="10">{vmax:.4g}</text>')
    out.append(f'<text x="{_fmt(bx + 18)}" y="130" font-size="10">0</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
