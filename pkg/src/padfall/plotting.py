"""Dependency-free SVG rendering with fixed number formatting (byte-stable output)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

DRONE_COLOR = "blue"
PAD_COLOR = "red"
IMPELLER_COLOR = "green"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Frame:
    def __init__(self, xs, ys, width=480, height=480, pad=40):
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        lo_x, hi_x = float(xs.min()), float(xs.max())
        lo_y, hi_y = float(ys.min()), float(ys.max())
        span = max(hi_x - lo_x, hi_y - lo_y, 0.5) * 1.1
        self.cx, self.cy = (lo_x + hi_x) / 2, (lo_y + hi_y) / 2
        self.scale = (min(width, height) - 2 * pad) / span
        self.width, self.height = width, height

    def __call__(self, x, y):
        return self.width / 2 + (x - self.cx) * self.scale, self.height / 2 - (y - self.cy) * self.scale


def trajectory_svg(drone_paths, pad_paths, impeller_points=(), title: str = "") -> str:
    """Top-down XY trajectories: drone blue, pad red, impeller green."""
    all_pts = [p for path in (*drone_paths, *pad_paths) for p in path] + list(impeller_points)
    if not all_pts:
        all_pts = [(0.0, 0.0)]
    xs, ys = zip(*[(p[0], p[1]) for p in all_pts])
    frame = _Frame(xs, ys)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{frame.width}" height="{frame.height}" '
        f'viewBox="0 0 {frame.width} {frame.height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="10" y="20" font-size="14">{escape(title)}</text>',
    ]

    def polyline(path, color):
        pts = [frame(p[0], p[1]) for p in path]
        if len(pts) == 1 or all(q == pts[0] for q in pts):
            x, y = pts[0]
            return f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="4" fill="{color}"/>'
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        return f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'

    for path in pad_paths:
        if len(path):
            out.append(polyline(path, PAD_COLOR))
    for path in drone_paths:
        if len(path):
            out.append(polyline(path, DRONE_COLOR))
    for p in impeller_points:
        x, y = frame(p[0], p[1])
        out.append(f'<rect x="{_fmt(x - 3)}" y="{_fmt(y - 3)}" width="6" height="6" fill="{IMPELLER_COLOR}"/>')
    legend = (("drone", DRONE_COLOR), ("landing pad", PAD_COLOR), ("impeller", IMPELLER_COLOR))
    for i, (label, color) in enumerate(legend):
        y = 40 + 16 * i
        out.append(f'<rect x="10" y="{y - 9}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="26" y="{y}" font-size="12">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _color(v: float, lo: float, hi: float) -> str:
    t = 0.0 if hi == lo else (v - lo) / (hi - lo)
    t = min(max(t, 0.0), 1.0)
    # dark blue (low) -> yellow (high)
    r = int(round(68 + t * (253 - 68)))
    g = int(round(1 + t * (231 - 1)))
    b = int(round(84 + t * (37 - 84)))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(axis, grid, title: str = "", cell: int = 4) -> str:
    grid = np.asarray(grid, float)
    n = grid.shape[0]
    lo, hi = float(grid.min()), float(grid.max())
    size = n * cell
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 30}" '
        f'viewBox="0 0 {size} {size + 30}">',
        f'<text x="4" y="18" font-size="14">{escape(title)} [{lo:.3f}, {hi:.3f}]</text>',
    ]
    for i in range(n):
        y = 30 + (n - 1 - i) * cell
        for j in range(n):
            out.append(f'<rect x="{j * cell}" y="{y}" width="{cell}" height="{cell}" fill="{_color(grid[i, j], lo, hi)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
