"""Typed loading of torusctrl run artifacts with schema validation."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

from . import SchemaMismatch

# documented column sets per producing subcommand
SCHEMAS = {
    "errors.csv": ["delta", "error"],
    "cost.csv": ["T", "inv_T", "control_norm"],
    "iterations.csv": ["sweep", "update_norm", "ratio", "weighted_v",
                       "weighted_f"],
    "trajectory.csv": ["t", "k", "re", "im"],
    "derivation.csv": ["n", "depth", "node_count", "exact"],
}


class RunArtifact:
    """A manifest-bearing output directory with validated tables."""

    def __init__(self, root: Path):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise SchemaMismatch(f"no manifest.json under {self.root}")
        raw = manifest_path.read_bytes()
        self.manifest = json.loads(raw)
        self.manifest_hash = hashlib.sha256(raw).hexdigest()[:16]
        if "subcommand" not in self.manifest or "config" not in self.manifest:
            raise SchemaMismatch("manifest missing subcommand/config fields")
        self.subcommand = self.manifest["subcommand"]
        self.tables: dict[str, list[list[float]]] = {}
        for name, header in SCHEMAS.items():
            for path in sorted(self.root.glob(name)):
                self.tables[path.name] = self._load(path, header)
        # indexed control tables from moment-control runs
        for path in sorted(self.root.glob("control_*.csv")):
            with open(path, newline="") as fh:
                head = next(csv.reader(fh), None)
            if not head or head[0] != "t":
                raise SchemaMismatch(f"{path.name}: bad control header {head}")
            self.tables[path.name] = self._load(path, head)

    def _load(self, path: Path, header: list[str]) -> list[list[float]]:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise SchemaMismatch(f"{path.name}: empty file")
        if rows[0] != header:
            raise SchemaMismatch(
                f"{path.name}: header {rows[0]} != expected {header}")
        if len(rows) < 2:
            raise SchemaMismatch(f"{path.name}: no data rows")
        out = []
        for i, row in enumerate(rows[1:], 2):
            if len(row) != len(header):
                raise SchemaMismatch(
                    f"{path.name}: row {i} has {len(row)} fields, "
                    f"expected {len(header)} (truncated file?)")
            try:
                out.append([float(v) for v in row])
            except ValueError as exc:
                raise SchemaMismatch(f"{path.name}: row {i}: {exc}") from exc
        return out

    def table(self, name: str) -> list[list[float]]:
        if name not in self.tables:
            raise SchemaMismatch(f"artifact has no table {name!r}")
        return self.tables[name]
