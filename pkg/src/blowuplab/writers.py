"""Bundle files: CSV tables, JSON reports, snapshots and the checksum manifest.

Data files are deterministic for a given configuration: numbers are written
with 17 significant digits, JSON keys are sorted and NaN becomes ``null``.
Only ``manifest.json`` carries wall-clock information.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import threading
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from blowuplab.models import SolutionHistory

logger = logging.getLogger(__name__)

CURVE_FILE = "curve.csv"
CLASSIFICATION_FILE = "classification.json"
MANIFEST_FILE = "manifest.json"
SWEEP_FILE = "sweep.csv"
TRACES_DIR = "traces"
FITS_DIR = "fits"
CORNER_DIR = "corner"


def probe_tag(r0: float) -> str:
    """File-name tag of a probe, e.g. ``r0.5``."""
    return f"r{r0:g}"


# ─── Plain writers ───────────────────────────────────────────────────

def write_csv(
    output_path: Path,
    rows: Sequence[Mapping[str, str]],
    fieldnames: Sequence[str],
    comments: Iterable[str] = (),
) -> Path:
    """Write rows to CSV, preceded by '#'-prefixed comment lines.

    Args:
        output_path: Path for the output CSV file.
        rows: Row dictionaries keyed by ``fieldnames``.
        fieldnames: Column order.
        comments: Header comment lines, written without the leading '#'.

    Returns:
        The path to the written CSV file.
    """
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, "w", newline="", encoding="utf-8") as f:
        for line in comments:
            f.write(f"# {line}\n")
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return output_path


def read_csv(path: Path) -> list[dict[str, str]]:
    """Read a CSV written by :func:`write_csv`, skipping comment lines."""
    with open(path, newline="", encoding="utf-8") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("".join(lines))))


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy scalars, tuples and non-finite floats for JSON."""
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else None
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "value") and not isinstance(value, str):
        return to_jsonable(value.value)
    return value


def write_json(output_path: Path, data: Any) -> Path:
    """Write JSON with sorted keys and NaN/inf mapped to null."""
    output_path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable(data), indent=2, sort_keys=True, allow_nan=False)
    output_path.write_text(text + "\n", encoding="utf-8")
    return output_path


def write_snapshots(output_path: Path, history: SolutionHistory, fmt: str) -> Path | None:
    """Dump the recorded snapshots as long-format CSV or a compressed ``.npz``.

    Returns None when ``fmt`` is ``"none"``.
    """
    if fmt == "none":
        return None
    if fmt == "npz":
        path = output_path.with_suffix(".npz")
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(
            path,
            r=history.r,
            t=history.times,
            u=history.u,
            ut=history.v,
            ur=history.ur,
            alive=history.alive,
        )
        return path
    if fmt != "csv":
        raise ValueError(f"unknown snapshot format '{fmt}'")
    rows = []
    for k, t in enumerate(history.times):
        for j, r in enumerate(history.r):
            rows.append(
                {
                    "t": f"{t:.17g}",
                    "r": f"{r:.17g}",
                    "u": f"{history.u[k, j]:.17g}",
                    "ut": f"{history.v[k, j]:.17g}",
                    "ur": f"{history.ur[k, j]:.17g}",
                    "alive": "1" if history.alive[k, j] else "0",
                }
            )
    return write_csv(
        output_path.with_suffix(".csv"),
        rows,
        ["t", "r", "u", "ut", "ur", "alive"],
        comments=[f"snapshots: {history.times.size} times x {history.r.size} nodes"],
    )


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ─── Serialized bundle writer ────────────────────────────────────────

class BundleWriter:
    """Single writer for one bundle directory.

    Probe workers hand their tables to this object; a lock serializes file
    writes and every written path is remembered for the manifest.
    """

    def __init__(self, bundle_dir: Path) -> None:
        self.bundle_dir = bundle_dir
        self._lock = threading.Lock()
        self._files: list[Path] = []

    @property
    def files(self) -> tuple[Path, ...]:
        with self._lock:
            return tuple(sorted(self._files))

    def _record(self, path: Path | None) -> Path | None:
        if path is not None and path not in self._files:
            self._files.append(path)
        return path

    def csv(
        self,
        relative: str,
        rows: Sequence[Mapping[str, str]],
        fieldnames: Sequence[str],
        comments: Iterable[str] = (),
    ) -> Path:
        with self._lock:
            path = write_csv(self.bundle_dir / relative, rows, fieldnames, comments)
            self._record(path)
        return path

    def json(self, relative: str, data: Any) -> Path:
        with self._lock:
            path = write_json(self.bundle_dir / relative, data)
            self._record(path)
        return path

    def snapshots(self, history: SolutionHistory, fmt: str) -> Path | None:
        with self._lock:
            return self._record(write_snapshots(self.bundle_dir / "snapshots", history, fmt))

    def manifest(
        self,
        config: Mapping[str, Any],
        version: str,
        wall_time: float,
        errors: Sequence[Mapping[str, Any]],
        summary: Mapping[str, Any] | None = None,
    ) -> Path:
        """Write ``manifest.json`` listing every other file with its SHA-256."""
        with self._lock:
            entries = [
                {
                    "path": path.relative_to(self.bundle_dir).as_posix(),
                    "bytes": path.stat().st_size,
                    "sha256": sha256_file(path),
                }
                for path in sorted(self._files)
            ]
            return write_json(
                self.bundle_dir / MANIFEST_FILE,
                {
                    "config": config,
                    "version": version,
                    "wall_time_seconds": round(wall_time, 3),
                    "files": entries,
                    "errors": list(errors),
                    "summary": dict(summary or {}),
                },
            )


# ─── Bundle loading ──────────────────────────────────────────────────

@dataclass
class Bundle:
    """Contents of a bundle directory as plain rows and JSON objects."""

    path: Path
    curve: list[dict[str, str]] = field(default_factory=list)
    traces: dict[str, list[dict[str, str]]] = field(default_factory=dict)
    fits: dict[str, list[dict[str, str]]] = field(default_factory=dict)
    corner: dict[str, list[dict[str, str]]] = field(default_factory=dict)
    classification: dict[str, Any] | None = None
    manifest: dict[str, Any] | None = None

    @property
    def empty(self) -> bool:
        return not (self.curve or self.traces or self.fits or self.corner)


def load_bundle(bundle_dir: Path) -> Bundle:
    """Load whatever a bundle directory holds; missing files stay empty.

    Raises:
        FileNotFoundError: If ``bundle_dir`` does not exist.
    """
    if not bundle_dir.is_dir():
        raise FileNotFoundError(f"bundle directory not found: {bundle_dir}")
    bundle = Bundle(path=bundle_dir)
    curve_path = bundle_dir / CURVE_FILE
    if curve_path.exists():
        bundle.curve = read_csv(curve_path)
    for directory, target in (
        (TRACES_DIR, bundle.traces),
        (FITS_DIR, bundle.fits),
        (CORNER_DIR, bundle.corner),
    ):
        for path in sorted((bundle_dir / directory).glob("*.csv")):
            tag = path.stem.split("_", 1)[-1]
            target[tag] = read_csv(path)
    for name, attribute in ((CLASSIFICATION_FILE, "classification"), (MANIFEST_FILE, "manifest")):
        path = bundle_dir / name
        if path.exists():
            setattr(bundle, attribute, json.loads(path.read_text(encoding="utf-8")))
    logger.debug(
        "loaded bundle %s: %d curve rows, %d traces",
        bundle_dir,
        len(bundle.curve),
        len(bundle.traces),
    )
    return bundle
