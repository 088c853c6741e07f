"""Minimal native SVG line charts for sweep summaries. Presentation only."""
import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def sweep_chart(summary, title="", width=640, height=400, log_y=False):
    """One series per method: mean error (with +/- std whiskers) against grid cell."""
    cells = sorted({s["cell"] for s in summary})
    labels = _varying_labels({s["cell"]: s["params"] for s in summary})
    methods = []
    for s in summary:
        if s["method"] not in methods:
            methods.append(s["method"])
    pts = {m: [(s["cell"], s["error_mean"], s["error_std"]) for s in summary if s["method"] == m and math.isfinite(s["error_mean"])] for m in methods}
    ys = [y for series in pts.values() for _, y, _ in series]
    left, right, top, bottom = 70, 150, 40, 70
    pw, ph = width - left - right, height - top - bottom
    if log_y:
        ys = [y for y in ys if y > 0]
    lo, hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if log_y:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi == lo:
        hi = lo + 1.0

    def sx(c):
        idx = cells.index(c)
        return left + (pw * idx / max(len(cells) - 1, 1))

    def sy(y):
        if log_y:
            y = math.log10(max(y, 10**lo))
        return top + ph * (1 - (y - lo) / (hi - lo))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">']
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    out.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>')
    for i in range(5):
        v = lo + (hi - lo) * i / 4
        y = top + ph * (1 - i / 4)
        txt = f"{10 ** v:.2g}" if log_y else f"{v:.3g}"
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{txt}</text>')
    for c in cells:
        out.append(
            f'<text x="{sx(c):.1f}" y="{top + ph + 16}" text-anchor="end" transform="rotate(-30 {sx(c):.1f} {top + ph + 16})">{escape(labels[c])}</text>'
        )
    for i, m in enumerate(methods):
        color = PALETTE[i % len(PALETTE)]
        series = pts[m]
        if series:
            path = " ".join(f"{'M' if j == 0 else 'L'}{sx(c):.1f},{sy(y):.1f}" for j, (c, y, _) in enumerate(series))
            out.append(f'<path d="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
            for c, y, sd in series:
                out.append(f'<line x1="{sx(c):.1f}" y1="{sy(max(y - sd, 1e-300) if log_y else y - sd):.1f}" x2="{sx(c):.1f}" y2="{sy(y + sd):.1f}" stroke="{color}"/>')
                out.append(f'<circle cx="{sx(c):.1f}" cy="{sy(y):.1f}" r="3" fill="{color}"/>')
        ly = top + 16 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 36}" y="{ly + 4}">{escape(m)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _varying_labels(params_by_cell):
    """Keep only the key=value parts that differ between cells."""
    parts = {c: p.split(";") for c, p in params_by_cell.items()}
    first = next(iter(parts.values()))
    varying = [i for i in range(len(first)) if len({tuple(v)[i] if i < len(v) else None for v in parts.values()}) > 1]
    return {c: ";".join(v[i] for i in varying if i < len(v)) or params_by_cell[c] for c, v in parts.items()}
