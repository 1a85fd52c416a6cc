"""SVG decision-boundary plots for 2-D datasets."""

from __future__ import annotations

import numpy as np

from .adapt import predict
from .data import LabeledDataset
from .nn import MlpModel

BACKGROUND = ("#c6dbef", "#fdd0a2", "#c7e9c0", "#dadaeb", "#fcbba1", "#d9d9d9")
POINTS = ("#08519c", "#a63603", "#006d2c", "#54278f", "#a50f15", "#252525")


def plot_bounds(X, margin: float = 0.1):
    lo, hi = X.min(axis=0), X.max(axis=0)
    pad = margin * np.where(hi > lo, hi - lo, 1.0)
    return lo - pad, hi + pad


def decision_grid(model: MlpModel, lo, hi, grid_res: int) -> np.ndarray:
    """Predicted class at the centre of each cell, row 0 at the top."""
    xs = lo[0] + (np.arange(grid_res) + 0.5) * (hi[0] - lo[0]) / grid_res
    ys = hi[1] - (np.arange(grid_res) + 0.5) * (hi[1] - lo[1]) / grid_res
    gx, gy = np.meshgrid(xs, ys)
    return predict(model, np.column_stack([gx.ravel(), gy.ravel()])).reshape(grid_res, grid_res)


def render_svg(model: MlpModel, ds: LabeledDataset, grid_res: int = 100, size: int = 480,
               title: str | None = None) -> str:
    if ds.dim != 2 or model.spec.input_dim != 2:
        raise ValueError(f"plots need 2-D inputs, got data d={ds.dim}, model d={model.spec.input_dim}")
    if grid_res < 1:
        raise ValueError(f"grid_res must be >= 1, got {grid_res}")
    lo, hi = plot_bounds(ds.X)
    grid = decision_grid(model, lo, hi, grid_res)
    cell = size / grid_res

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">']
    if title:
        out.append(f"<title>{_escape(title)}</title>")
    out.append('<g shape-rendering="crispEdges">')
    for r in range(grid_res):
        for c in range(grid_res):
            out.append(f'<rect x="{c * cell:.3f}" y="{r * cell:.3f}" width="{cell:.3f}" height="{cell:.3f}" '
                       f'fill="{BACKGROUND[grid[r, c] % len(BACKGROUND)]}"/>')
    out.append("</g>")
    out.append("<g>")
    px = (ds.X[:, 0] - lo[0]) / (hi[0] - lo[0]) * size
    py = (hi[1] - ds.X[:, 1]) / (hi[1] - lo[1]) * size
    for x, y, label in zip(px, py, ds.labels):
        out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="2.5" fill="{POINTS[label % len(POINTS)]}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def save_svg(model: MlpModel, ds: LabeledDataset, path, grid_res: int = 100, title: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_svg(model, ds, grid_res, title=title))


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
