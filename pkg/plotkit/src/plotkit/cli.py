"""Batch rendering entry point.

    plotkit render out/fig2_manifest.json --out images/
    plotkit golden --out images/

`render` takes one or more manifest paths; `golden` renders the datasets
shipped with the package (one per figure).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .manifest import ManifestError, golden_manifests, load_manifest
from .render import render

EXIT_OK = 0
EXIT_CONFIG = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="Render figure manifests to PNG images.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render one or more manifest files")
    p.add_argument("manifests", nargs="+")
    p.add_argument("--out", required=True)

    p = sub.add_parser("golden", help="render the manifests shipped with the package")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "render":
            paths = [Path(p) for p in args.manifests]
        else:
            paths = list(golden_manifests())
        for mpath in paths:
            for image in render(load_manifest(mpath), Path(args.out)):
                print(f"wrote {image}")
    except (ManifestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
