"""Minimal deterministic SVG emitters for pipeline artifacts.

Hand-rolled on purpose: output must be byte-identical across runs so
manifests hash stably, and a raster toolchain would be a heavy dependency
for line charts and heatmap grids.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

SERIES_COLORS = {"iob": "#1f77b4", "cob": "#ff7f0e", "bg": "#2ca02c"}
_FALLBACK = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _polyline(xs, ys, color: str, width: float = 1.5) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    return (
        f'<polyline fill="none" stroke="{color}" stroke-width="{width}" '
        f'points="{pts}"/>'
    )


def _scale(values: np.ndarray, lo: float, hi: float, out_lo: float, out_hi: float) -> np.ndarray:
    if hi == lo:
        return np.full_like(values, (out_lo + out_hi) / 2.0)
    return out_lo + (values - lo) / (hi - lo) * (out_hi - out_lo)


def _panel(series: dict[str, np.ndarray], x0, y0, w, h, title: str) -> list[str]:
    parts = [
        f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(w)}" height="{_fmt(h)}" '
        f'fill="white" stroke="#888" stroke-width="0.5"/>',
        f'<text x="{_fmt(x0 + 4)}" y="{_fmt(y0 + 14)}" font-size="11" '
        f'font-family="sans-serif" fill="#333">{title}</text>',
    ]
    finite = [v[np.isfinite(v)] for v in series.values() if len(v)]
    finite = [v for v in finite if len(v)]
    if not finite:
        return parts
    lo = min(float(v.min()) for v in finite)
    hi = max(float(v.max()) for v in finite)
    for i, (name, vals) in enumerate(series.items()):
        if len(vals) == 0:
            continue
        xs = _scale(np.arange(len(vals), dtype=float), 0, max(len(vals) - 1, 1), x0 + 6, x0 + w - 6)
        ys = _scale(np.asarray(vals, dtype=float), lo, hi, y0 + h - 8, y0 + 22)
        color = SERIES_COLORS.get(name, _FALLBACK[i % len(_FALLBACK)])
        parts.append(_polyline(xs, ys, color))
    return parts


def _document(width: int, height: int, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    )
    return "\n".join([head, *body, "</svg>"]) + "\n"


def write_line_chart(path: str | Path, series: dict[str, np.ndarray], title: str) -> Path:
    """One panel, one polyline per named series."""
    body = _panel(series, 0, 0, 640, 240, title)
    path = Path(path)
    path.write_text(_document(640, 240, body), encoding="utf-8")
    return path


def write_paired_chart(
    path: str | Path,
    top: dict[str, np.ndarray],
    bottom: dict[str, np.ndarray],
    top_title: str,
    bottom_title: str,
) -> Path:
    """Two stacked panels (series above, profile below)."""
    body = _panel(top, 0, 0, 640, 220, top_title)
    body += _panel(bottom, 0, 228, 640, 220, bottom_title)
    path = Path(path)
    path.write_text(_document(640, 448, body), encoding="utf-8")
    return path


def write_panel_grid(
    path: str | Path,
    panels: list[tuple[str, dict[str, np.ndarray]]],
    columns: int = 2,
) -> Path:
    """Grid of line panels (one per cluster barycenter, variables overlaid)."""
    pw, ph, pad = 320, 200, 8
    rows = -(-len(panels) // columns)
    body: list[str] = []
    for i, (title, series) in enumerate(panels):
        r, c = divmod(i, columns)
        body += _panel(series, c * (pw + pad), r * (ph + pad), pw, ph, title)
    width = columns * (pw + pad)
    height = rows * (ph + pad)
    path = Path(path)
    path.write_text(_document(width, height, body), encoding="utf-8")
    return path


def _ramp(t: float) -> str:
    # Blue (low) to red (high) through white.
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        u = t / 0.5
        r, g, b = int(49 + u * (255 - 49)), int(104 + u * (255 - 104)), 255
    else:
        u = (t - 0.5) / 0.5
        r, g, b = 255, int(255 - u * (255 - 80)), int(255 - u * (255 - 60))
    return f"#{r:02x}{g:02x}{b:02x}"


def write_heatmap(
    path: str | Path,
    cells: np.ndarray,
    row_labels: list[str],
    col_labels: list[str],
    title: str,
) -> Path:
    """Colored grid; NaN cells are gray."""
    cw, ch = 36, 24
    left, top = 60, 34
    rows, cols = cells.shape
    finite = cells[np.isfinite(cells)]
    lo = float(finite.min()) if len(finite) else 0.0
    hi = float(finite.max()) if len(finite) else 1.0
    body = [
        f'<text x="4" y="18" font-size="12" font-family="sans-serif" fill="#333">{title}</text>'
    ]
    for i in range(rows):
        body.append(
            f'<text x="4" y="{top + i * ch + 16}" font-size="10" '
            f'font-family="sans-serif" fill="#333">{row_labels[i]}</text>'
        )
        for j in range(cols):
            v = cells[i, j]
            if np.isfinite(v):
                t = 0.5 if hi == lo else (float(v) - lo) / (hi - lo)
                fill = _ramp(t)
            else:
                fill = "#cccccc"
            body.append(
                f'<rect x="{left + j * cw}" y="{top + i * ch}" width="{cw - 1}" '
                f'height="{ch - 1}" fill="{fill}"/>'
            )
    for j in range(cols):
        body.append(
            f'<text x="{left + j * cw + 4}" y="{top + rows * ch + 14}" font-size="10" '
            f'font-family="sans-serif" fill="#333">{col_labels[j]}</text>'
        )
    width = left + cols * cw + 10
    height = top + rows * ch + 24
    path = Path(path)
    path.write_text(_document(width, height, body), encoding="utf-8")
    return path
