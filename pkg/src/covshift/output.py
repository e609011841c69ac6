"""CSV and SVG output for sweep rows.

The SVG writer is a small log-log line chart: one polyline and one circle
marker per data point for each mode. Output is deterministic text.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

from .experiments import SweepRow

__all__ = ["CSV_HEADER", "emit_csv", "format_csv", "read_csv", "emit_svg", "render_svg"]

CSV_HEADER = ["mode", "sample_size", "gamma0", "gammaM", "mean_risk", "stderr_risk", "n_repeats", "evaluator"]


def _num(x):
    return format(float(x), ".15g")


def format_csv(rows) -> str:
    """CSV text; an ``error`` column is appended only if some row failed."""
    rows = list(rows)
    with_error = any(r.error for r in rows)
    lines = [",".join(CSV_HEADER + (["error"] if with_error else []))]
    for r in rows:
        vals = [r.mode, str(r.sample_size), _num(r.gamma0), _num(r.gammaM), _num(r.mean_risk),
                _num(r.stderr_risk), str(r.n_repeats), r.evaluator]
        if with_error:
            vals.append('"' + r.error.replace('"', '""') + '"' if r.error else "")
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def emit_csv(rows, path) -> None:
    Path(path).write_text(format_csv(rows))


def read_csv(path) -> list[SweepRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[: len(CSV_HEADER)] != CSV_HEADER:
            raise ValueError(f"{path}: not a sweep CSV (header {reader.fieldnames})")
        return [
            SweepRow(
                mode=rec["mode"],
                sample_size=int(rec["sample_size"]),
                gamma0=float(rec["gamma0"]),
                gammaM=float(rec["gammaM"]),
                mean_risk=float(rec["mean_risk"]),
                stderr_risk=float(rec["stderr_risk"]),
                n_repeats=int(rec["n_repeats"]),
                evaluator=rec["evaluator"],
                error=rec.get("error") or "",
            )
            for rec in reader
        ]


_COLORS = {"pretrain": "#1f77b4", "finetune": "#2ca02c", "supervised": "#d62728"}
_W, _H, _PAD = 640, 440, 70


def _span(values):
    lo, hi = math.log10(min(values)), math.log10(max(values))
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def render_svg(rows, title: str = "") -> str:
    """Log-log chart of mean risk against sample size, one series per mode."""
    pts = [r for r in rows if r.sample_size > 0 and r.mean_risk > 0 and math.isfinite(r.mean_risk)]
    if not pts:
        raise ValueError("no positive finite data points to plot")
    xlo, xhi = _span([r.sample_size for r in pts])
    ylo, yhi = _span([r.mean_risk for r in pts])

    def px(x):
        return _PAD + (math.log10(x) - xlo) / (xhi - xlo) * (_W - 2 * _PAD)

    def py(y):
        return _H - _PAD - (math.log10(y) - ylo) / (yhi - ylo) * (_H - 2 * _PAD)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<text x="{_W / 2:.1f}" y="{_H - 20}" text-anchor="middle" font-size="14">sample size</text>',
        f'<text x="20" y="{_H / 2:.1f}" text-anchor="middle" font-size="14" transform="rotate(-90 20 {_H / 2:.1f})">excess risk</text>',
    ]
    if title:
        out.append(f'<text x="{_W / 2:.1f}" y="30" text-anchor="middle" font-size="15">{escape(title)}</text>')
    for lo, hi, axis in ((xlo, xhi, "x"), (ylo, yhi, "y")):
        for e in range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1):
            if axis == "x":
                x = px(10.0**e)
                out.append(f'<text x="{x:.1f}" y="{_H - _PAD + 18}" text-anchor="middle" font-size="11">1e{e}</text>')
            else:
                y = py(10.0**e)
                out.append(f'<text x="{_PAD - 8}" y="{y + 4:.1f}" text-anchor="end" font-size="11">1e{e}</text>')
    modes = sorted({r.mode for r in pts})
    for i, mode in enumerate(modes):
        color = _COLORS.get(mode, "#555555")
        series = sorted((r for r in pts if r.mode == mode), key=lambda r: r.sample_size)
        coords = " ".join(f"{px(r.sample_size):.2f},{py(r.mean_risk):.2f}" for r in series)
        out.append(f'<g class="series" data-mode="{escape(mode)}">')
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        for r in series:
            out.append(f'<circle class="marker" cx="{px(r.sample_size):.2f}" cy="{py(r.mean_risk):.2f}" r="3.5" fill="{color}"/>')
        out.append("</g>")
        ly = _PAD + 18 * i
        out.append(f'<text x="{_W - _PAD - 90}" y="{ly}" font-size="12" fill="{color}">{escape(mode)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(rows, path, title: str = "") -> None:
    Path(path).write_text(render_svg(rows, title))
