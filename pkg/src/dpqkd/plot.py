"""Minimal self-contained SVG line plots with an optional log-scale y axis."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
)


class LinePlot:
    """Collects named series and renders them as one SVG document.

    Args:
        title: Plot title.
        xlabel: X axis label.
        ylabel: Y axis label.
        log_y: Use a base-10 logarithmic y axis; non-positive values are
            skipped and break the line.
    """

    def __init__(self, title: str, xlabel: str, ylabel: str, log_y: bool = True,
                 width: int = 720, height: int = 480):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.log_y = log_y
        self.width, self.height = width, height
        self.series: list[tuple[str, list[float], list[float], bool]] = []

    def add(self, label: str, xs, ys, dashed: bool = False) -> None:
        self.series.append((label, [float(x) for x in xs], [float(y) for y in ys], dashed))

    def _ok(self, y: float) -> bool:
        return math.isfinite(y) and (y > 0 or not self.log_y)

    def _ranges(self):
        xs = [x for _, sx, _, _ in self.series for x in sx]
        ys = [y for _, _, sy, _ in self.series for y in sy if self._ok(y)]
        x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
        if x1 == x0:
            x1 = x0 + 1.0
        if not ys:
            return x0, x1, (0.0, 1.0) if self.log_y else (0.0, 1.0)
        if self.log_y:
            lo, hi = math.floor(math.log10(min(ys))), math.ceil(math.log10(max(ys)))
            return x0, x1, (lo, hi if hi > lo else lo + 1)
        lo, hi = min(ys), max(ys)
        return x0, x1, (lo, hi if hi > lo else lo + 1.0)

    def render(self) -> str:
        w, h = self.width, self.height
        ml, mr, mt, mb = 80, 160, 40, 60
        pw, ph = w - ml - mr, h - mt - mb
        x0, x1, (y0, y1) = self._ranges()

        def px(x):
            return ml + (x - x0) / (x1 - x0) * pw

        def py(y):
            v = math.log10(y) if self.log_y else y
            return mt + ph - (v - y0) / (y1 - y0) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
            f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">',
            f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
            f'<text x="{ml + pw / 2}" y="{mt / 2 + 6}" text-anchor="middle" font-size="15">'
            f"{escape(self.title)}</text>",
            f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        ]
        for k in range(6):
            xv = x0 + (x1 - x0) * k / 5
            X = px(xv)
            out.append(f'<line x1="{X:.2f}" y1="{mt + ph}" x2="{X:.2f}" y2="{mt + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{X:.2f}" y="{mt + ph + 18}" text-anchor="middle">{xv:g}</text>')
        if self.log_y:
            ticks = [(10.0 ** e, f"1e{e}") for e in range(int(y0), int(y1) + 1)]
        else:
            ticks = [(y0 + (y1 - y0) * k / 5, f"{y0 + (y1 - y0) * k / 5:.3g}") for k in range(6)]
        for yv, lab in ticks:
            Y = py(yv)
            out.append(f'<line x1="{ml}" y1="{Y:.2f}" x2="{ml + pw}" y2="{Y:.2f}" stroke="#dddddd"/>')
            out.append(f'<text x="{ml - 6}" y="{Y + 4:.2f}" text-anchor="end">{lab}</text>')
        out.append(f'<text x="{ml + pw / 2}" y="{h - 15}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(
            f'<text x="18" y="{mt + ph / 2}" text-anchor="middle" '
            f'transform="rotate(-90 18 {mt + ph / 2})">{escape(self.ylabel)}</text>'
        )
        for i, (label, xs, ys, dashed) in enumerate(self.series):
            color = PALETTE[i % len(PALETTE)]
            dash = ' stroke-dasharray="6 4"' if dashed else ""
            runs, cur = [], []
            for x, y in zip(xs, ys):
                if self._ok(y):
                    cur.append(f"{px(x):.2f},{py(y):.2f}")
                elif cur:
                    runs.append(cur)
                    cur = []
            if cur:
                runs.append(cur)
            for run in runs:
                out.append(
                    f'<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} '
                    f'points="{" ".join(run)}"/>'
                )
            ly = mt + 14 + 18 * i
            out.append(
                f'<line x1="{ml + pw + 12}" y1="{ly}" x2="{ml + pw + 36}" y2="{ly}" '
                f'stroke="{color}" stroke-width="2"{dash}/>'
            )
            out.append(f'<text x="{ml + pw + 42}" y="{ly + 4}">{escape(label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render())
