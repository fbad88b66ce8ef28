"""CSV/JSON artifacts and the run manifest."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, is_dataclass
from datetime import date, datetime, timezone
from enum import Enum
from importlib import metadata
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ..numerics.base import ConfigError

MANIFEST_NAME = "manifest.json"
FLOAT_FORMAT = ".17g"
VERSIONED_PACKAGES = ("fellerlab", "numpy", "scipy", "rich", "termcolor")


@dataclass
class ResultTable:
    """A named table of panel results, written as `<name>.csv`."""

    name: str
    header: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def add_row(self, *values: Any) -> None:
        if len(values) != len(self.header):
            raise ValueError(f"table {self.name} expects {len(self.header)} columns, got {len(values)}")
        self.rows.append(list(values))

    def column(self, name: str) -> list[Any]:
        index = self.header.index(name)
        return [row[index] for row in self.rows]


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


def _serialize(value: Any) -> Any:
    """Convert nested results into JSON-serialisable structures."""
    if is_dataclass(value) and not isinstance(value, type):
        return _serialize(asdict(value))
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (datetime, date)):
        return value.isoformat()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.ndarray):
        return [_serialize(item) for item in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else str(number)
    if isinstance(value, (list, tuple, set)):
        return [_serialize(item) for item in value]
    if isinstance(value, dict):
        return {str(key): _serialize(item) for key, item in value.items()}
    return value


def format_cell(value: Any) -> str:
    """CSV cell text: floats with 17 significant digits, '.' decimal, no grouping."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


def render_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(value) for value in row])
    return buffer.getvalue()


def package_versions() -> dict[str, str]:
    versions = {}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class ArtifactWriter:
    """Single owner of every file in one output directory."""

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            sentinel = self.root / ".write-check"
            sentinel.write_text("", encoding="utf-8")
            sentinel.unlink()
        except OSError as exc:
            raise ConfigError(f"output directory {self.root} is not writable: {exc}") from None
        self.artifacts: list[dict[str, str]] = []

    def _write(self, name: str, kind: str, text: str) -> Path:
        path = self.root / name
        path.write_text(text, encoding="utf-8")
        self.artifacts.append({"name": name, "kind": kind})
        return path

    def write_table(self, table: ResultTable) -> Path:
        return self._write(f"{table.name}.csv", "csv", render_csv(table.header, table.rows))

    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
        return self._write(name, "csv", render_csv(header, rows))

    def write_json(self, name: str, payload: Any) -> Path:
        return self._write(name, "json", json.dumps(_serialize(payload), indent=2, sort_keys=True) + "\n")

    def write_manifest(
        self,
        experiment: str,
        config: Mapping[str, Any],
        seed: int,
        checks: Sequence[Check],
        wall_times: Mapping[str, float],
    ) -> Path:
        """Inputs, versions, seed and wall-times; the only file carrying a timestamp."""
        manifest = {
            "experiment": experiment,
            "created": datetime.now(timezone.utc),
            "seed": seed,
            "config": config,
            "versions": package_versions(),
            "wall_times_s": wall_times,
            "artifacts": self.artifacts,
            "checks": checks,
        }
        path = self.root / MANIFEST_NAME
        path.write_text(json.dumps(_serialize(manifest), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open(encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise ConfigError(f"artifact {path} is empty")
    return rows[0], rows[1:]


def load_manifest(path: Path | str) -> dict[str, Any]:
    """Read a manifest and confirm every artifact it lists is present."""
    manifest_path = Path(path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"manifest {manifest_path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest {manifest_path} is not valid JSON: {exc}") from None
    if not isinstance(manifest, dict) or not manifest.get("artifacts"):
        raise ConfigError(f"manifest {manifest_path} lists no artifacts")
    missing = [item["name"] for item in manifest["artifacts"] if not (manifest_path.parent / item["name"]).exists()]
    if missing:
        raise ConfigError(f"missing artifact files: {', '.join(missing)}")
    manifest["_root"] = str(manifest_path.parent)
    return manifest
