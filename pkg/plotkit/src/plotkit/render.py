"""Render manifest panels to PNG.

Rendering is read-only over the inputs and writes one image per panel,
named after the panel, so reruns overwrite rather than accumulate.
Axes auto-scale to the data; the colormap is pinned for reproducible
output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .manifest import Manifest, ManifestError, Panel, read_columns

COLORMAP = "viridis"
DPI = 150


def _column(data: dict, name: str, panel: Panel) -> np.ndarray:
    try:
        return data[name]
    except KeyError:
        raise ManifestError(
            f"panel '{panel.name}': column '{name}' not in '{panel.file}'") from None


def _render_trajectory3d(panel: Panel, data: dict) -> plt.Figure:
    names = panel.role("columns")
    if len(names) != 3:
        raise ManifestError(f"panel '{panel.name}': need 3 columns, got {len(names)}")
    x, y, z = (_column(data, n, panel) for n in names)
    fig = plt.figure(figsize=(6.0, 5.0))
    ax = fig.add_subplot(projection="3d")
    ax.plot(x, y, z, linewidth=0.7)
    ax.set_xlabel(names[0])
    ax.set_ylabel(names[1])
    ax.set_zlabel(names[2])
    ax.set_title(panel.title)
    return fig


def _render_timeseries(panel: Panel, data: dict) -> plt.Figure:
    abscissa = panel.role("abscissa")
    t = _column(data, abscissa, panel)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name in panel.role("ordinates"):
        ax.plot(t, _column(data, name, panel), linewidth=1.0, label=name)
    ax.set_xlabel(abscissa)
    ax.set_title(panel.title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    return fig


def _render_heatmap(panel: Panel, data: dict) -> plt.Figure:
    value_name = panel.role("value")
    values = _column(data, value_name, panel)
    shape = tuple(panel.role("shape"))
    if values.size != shape[0] * shape[1]:
        raise ManifestError(
            f"panel '{panel.name}': {values.size} values do not fill shape {shape}")
    # Rows of the CSV iterate the first axis outermost; transpose so the
    # second axis runs vertically.
    grid = values.reshape(shape).T
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    image = ax.imshow(grid, origin="lower", extent=panel.role("extent"),
                      aspect="auto", cmap=COLORMAP)
    fig.colorbar(image, ax=ax, label=value_name)
    ax.set_xlabel(panel.role("x"))
    ax.set_ylabel(panel.role("y"))
    ax.set_title(panel.title)
    return fig


RENDERERS = {
    "trajectory3d": _render_trajectory3d,
    "timeseries": _render_timeseries,
    "heatmap": _render_heatmap,
}


def render_panel(panel: Panel, root: Path, outdir: Path) -> Path:
    data = read_columns(root / panel.file)
    fig = RENDERERS[panel.kind](panel, data)
    out = outdir / f"{panel.name}.png"
    try:
        fig.savefig(out, dpi=DPI)
    finally:
        plt.close(fig)
    return out


def render(manifest: Manifest, outdir: str | Path) -> list[Path]:
    """One PNG per panel; returns the written paths in panel order."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    return [render_panel(panel, manifest.root, outdir) for panel in manifest.panels]
