"""Result rows, CSV round-tripping and minimal standalone SVG plots."""
from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

CSV_HEADER = ("t_s", "elev_A_deg", "range_A_km", "elev_B_deg", "range_B_km",
              "param", "rate_mean", "rate_std", "qber")


@dataclass(frozen=True)
class ResultRow:
    t_s: float | None = None
    elev_A_deg: float | None = None
    range_A_km: float | None = None
    elev_B_deg: float | None = None
    range_B_km: float | None = None
    param: float | str | None = None
    rate_mean: float | None = None
    rate_std: float | None = None
    qber: float | None = None


assert tuple(f.name for f in fields(ResultRow)) == CSV_HEADER


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)  # shortest round-trip form
    return str(v)


def _parse(v: str, allow_text: bool = False):
    if v == "":
        return None
    try:
        return float(v)
    except ValueError:
        if allow_text:
            return v
        raise


def write_csv(rows: Sequence[ResultRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([_fmt(v) for v in astuple(r)])


def read_csv(path: str | Path) -> list[ResultRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        return [ResultRow(*(_parse(v, allow_text=(name == "param")) for name, v in zip(CSV_HEADER, rec)))
                for rec in reader]


# -- SVG --------------------------------------------------------------------------

_W, _H = 640, 400
_MARGIN = dict(left=70, right=150, top=30, bottom=50)
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf")


def _n(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def _series(rows: Sequence[ResultRow], kind: str):
    """Group rows into ``(label, [(x, y), ...])`` series, deterministic order."""
    if kind == "rate_vs_time":
        groups: dict[str, list[tuple[float, float]]] = {}
        for r in rows:
            if r.t_s is None or r.rate_mean is None:
                continue
            groups.setdefault("" if r.param is None else str(r.param), []).append((r.t_s, r.rate_mean))
        return [(k, sorted(v)) for k, v in groups.items()], "time (s)", "rate"
    if kind == "elevation_vs_time":
        pts = [(r.t_s, r.elev_A_deg) for r in rows if r.t_s is not None and r.elev_A_deg is not None]
        return [("A", sorted(pts))], "time (s)", "elevation A (deg)"
    if kind == "rate_vs_param":
        acc: dict[object, list[float]] = {}
        for r in rows:
            if r.rate_mean is not None and r.param is not None:
                acc.setdefault(r.param, []).append(r.rate_mean)
        keys = list(acc)
        numeric = all(isinstance(k, (int, float)) for k in keys)
        pts = [((k if numeric else float(i)), math.fsum(acc[k]) / len(acc[k])) for i, k in enumerate(keys)]
        return [("mean rate", sorted(pts) if numeric else pts)], "parameter", "mean rate"
    raise ValueError(f"unknown plot kind '{kind}'")


def emit_plot(rows: Sequence[ResultRow], kind: str, path: str | Path, title: str = "") -> str:
    """Write a standalone SVG line plot and return its text."""
    if not rows:
        raise ValueError("cannot plot an empty result set")
    series, xlabel, ylabel = _series(rows, kind)
    series = [(label, pts) for label, pts in series if pts]
    if not series:
        raise ValueError(f"no plottable points for '{kind}'")
    xs = [x for _, pts in series for x, _ in pts]
    ys = [y for _, pts in series for _, y in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(0.0, min(ys)), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1.0, x1 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pl, pr, pt, pb = _MARGIN["left"], _W - _MARGIN["right"], _MARGIN["top"], _H - _MARGIN["bottom"]

    def sx(x):
        return pl + (x - x0) / (x1 - x0) * (pr - pl)

    def sy(y):
        return pb - (y - y0) / (y1 - y0) * (pb - pt)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>']
    if title:
        out.append(f'<text x="{_W / 2:.2f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<line x1="{pl}" y1="{pb}" x2="{pr}" y2="{pb}" stroke="black"/>')
    out.append(f'<line x1="{pl}" y1="{pb}" x2="{pl}" y2="{pt}" stroke="black"/>')
    for tx in _ticks(x0, x1):
        out.append(f'<line x1="{_n(sx(tx))}" y1="{pb}" x2="{_n(sx(tx))}" y2="{pb + 5}" stroke="black"/>')
        out.append(f'<text x="{_n(sx(tx))}" y="{pb + 18}" text-anchor="middle">{tx:.4g}</text>')
    for ty in _ticks(y0, y1):
        out.append(f'<line x1="{pl - 5}" y1="{_n(sy(ty))}" x2="{pl}" y2="{_n(sy(ty))}" stroke="black"/>')
        out.append(f'<text x="{pl - 8}" y="{_n(sy(ty) + 4)}" text-anchor="end">{ty:.4g}</text>')
    out.append(f'<text x="{(pl + pr) / 2:.2f}" y="{_H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(pt + pb) / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(pt + pb) / 2:.2f})">{escape(ylabel)}</text>')
    for i, (label, pts) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{_n(sx(x))},{_n(sy(y))}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        if label:
            ly = pt + 14 * (i + 1)
            out.append(f'<text x="{pr + 10}" y="{ly}" fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    Path(path).write_text(text, encoding="utf-8")
    return text
