"""Figure manifests: which CSV columns to plot, and how.

A manifest is the JSON file the data pipeline writes next to its CSVs.
It names the data files of one figure and carries one entry per panel
with the plot kind and the column roles.  Loading validates the
plumbing (required keys, referenced files present, known kinds); column
existence is checked against the CSV header at render time, where the
error can name the offending panel.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np


class PlotkitError(Exception):
    """Base class for all errors raised by this package."""


class ManifestError(PlotkitError):
    """The manifest is malformed or references missing data."""


PANEL_KINDS = ("trajectory3d", "timeseries", "heatmap")


@dataclass(slots=True, frozen=True)
class Panel:
    """One image: a plot kind plus column roles into a data file."""

    name: str
    kind: str
    file: str
    title: str
    roles: dict

    def role(self, key: str):
        try:
            return self.roles[key]
        except KeyError:
            raise ManifestError(f"panel '{self.name}' lacks '{key}'") from None


@dataclass(slots=True, frozen=True)
class Manifest:
    """A figure's data files and panels, rooted at the manifest's directory."""

    figure: str
    root: Path
    files: tuple[str, ...]
    panels: tuple[Panel, ...]

    def data_path(self, name: str) -> Path:
        return self.root / name


def _require(mapping: dict, key: str, where: str):
    try:
        return mapping[key]
    except KeyError:
        raise ManifestError(f"{where} lacks '{key}'") from None


def _parse_panel(raw: dict, index: int) -> Panel:
    where = f"panel {index}"
    name = str(_require(raw, "name", where))
    kind = str(_require(raw, "kind", where))
    if kind not in PANEL_KINDS:
        raise ManifestError(
            f"panel '{name}': unknown kind '{kind}' (have {', '.join(PANEL_KINDS)})")
    file = str(_require(raw, "file", where))
    roles = {k: v for k, v in raw.items()
             if k not in ("name", "kind", "file", "title")}
    return Panel(name, kind, file, str(raw.get("title", name)), roles)


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ManifestError(f"{path}: expected a JSON object")
    figure = str(_require(raw, "figure", str(path)))
    files = tuple(str(f) for f in _require(raw, "files", str(path)))
    panels = tuple(_parse_panel(p, i)
                   for i, p in enumerate(_require(raw, "panels", str(path))))
    root = path.parent
    for name in files + tuple(p.file for p in panels):
        if not (root / name).is_file():
            raise ManifestError(f"{path}: data file '{name}' not found in {root}")
    return Manifest(figure, root, files, panels)


def read_columns(path: str | Path) -> dict[str, np.ndarray]:
    """CSV columns as float arrays, keyed by header name."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ManifestError(f"{path}: no data rows")
    return {key: np.array([float(r[key]) for r in rows]) for key in rows[0]}


def golden_root() -> Path:
    return Path(str(resources.files("plotkit").joinpath("golden")))


def golden_manifests() -> tuple[Path, ...]:
    """The manifests shipped with the package, one directory per figure."""
    found = sorted(golden_root().glob("*/*_manifest.json"))
    if not found:
        raise ManifestError(f"no golden manifests under {golden_root()}")
    return tuple(found)
