"""Manifest-driven rendering of figure datasets to PNG.

The data pipeline emits CSVs plus a JSON manifest describing the panels
of each figure; this package turns a manifest into images (3D trajectory
curves, time-series panels, heatmaps) and ships golden copies of the
four standard datasets.
"""

from .manifest import (
    Manifest,
    ManifestError,
    Panel,
    PlotkitError,
    golden_manifests,
    golden_root,
    load_manifest,
    read_columns,
)
from .render import render, render_panel

__version__ = "0.1.0"

__all__ = [
    "Manifest",
    "ManifestError",
    "Panel",
    "PlotkitError",
    "golden_manifests",
    "golden_root",
    "load_manifest",
    "read_columns",
    "render",
    "render_panel",
]
