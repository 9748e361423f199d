"""Command-line entry: point at a torusctrl output directory, get figures."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import SchemaMismatch
from .artifact import RunArtifact
from .render import KINDS, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="torusctrl-plots",
        description="Render diagnostic figures from torusctrl artifacts.")
    parser.add_argument("artifact_dir", type=Path)
    parser.add_argument("--kind", choices=("auto",) + KINDS, default="auto")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (defaults to the artifact dir)")
    args = parser.parse_args(argv)
    try:
        artifact = RunArtifact(args.artifact_dir)
        paths = render(artifact, args.kind, args.out)
    except SchemaMismatch as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
