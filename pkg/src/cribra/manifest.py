"""Manifest rows, labels and the CSV conventions used by every file we write.

All CSV outputs start with a ``# format_version=N`` comment line, are UTF-8,
comma separated, and are written through :func:`atomic_write` so a file is
either complete or absent.
"""

from __future__ import annotations

import contextlib
import csv
import enum
import io
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ConfigError

FORMAT_VERSION = 1
FORMAT_LINE = f"# format_version={FORMAT_VERSION}"

MANIFEST_COLUMNS = ["tile_path", "tile_id", "patient_id", "label", "source_id", "dx", "dy", "theta"]


class Label(enum.Enum):
    CRIBRIFORM = "cribriform"
    NON_CRIBRIFORM = "non_cribriform"
    UNLABELED = "unlabeled"

    @classmethod
    def parse(cls, text: str) -> "Label":
        try:
            return cls(text.strip())
        except ValueError:
            raise ConfigError(f"unknown label {text!r}; expected one of "
                              + ", ".join(m.value for m in cls)) from None

    @property
    def sign(self) -> int:
        """+1 for cribriform, -1 otherwise (SVM convention)."""
        return 1 if self is Label.CRIBRIFORM else -1

    @property
    def class_index(self) -> int:
        """1 for cribriform, 0 otherwise (MLP convention)."""
        return 1 if self is Label.CRIBRIFORM else 0


@dataclass(frozen=True)
class ManifestRow:
    tile_path: str
    tile_id: str
    patient_id: str
    label: Label = Label.UNLABELED
    source_id: str = ""
    dx: int | None = None
    dy: int | None = None
    theta: float | None = None

    def as_record(self) -> list[str]:
        return [
            self.tile_path,
            self.tile_id,
            self.patient_id,
            self.label.value,
            self.source_id,
            "" if self.dx is None else str(self.dx),
            "" if self.dy is None else str(self.dy),
            "" if self.theta is None else f"{self.theta:g}",
        ]


def _opt_int(text: str) -> int | None:
    return int(text) if text.strip() else None


def _opt_float(text: str) -> float | None:
    return float(text) if text.strip() else None


def iter_csv(path: str | os.PathLike) -> Iterator[dict[str, str]]:
    """Yield dict rows from one of our CSV files, skipping ``#`` comment lines."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = (line for line in fh if not line.startswith("#"))
        yield from csv.DictReader(lines)


def read_manifest(path: str | os.PathLike) -> list[ManifestRow]:
    """Read a manifest; relative tile paths are resolved against its directory."""
    base = Path(path).parent
    rows = []
    seen = set()
    for rec in iter_csv(path):
        missing = [c for c in ("tile_path", "tile_id", "patient_id", "label") if c not in rec]
        if missing:
            raise ConfigError(f"{path}: manifest lacks columns {missing}")
        tile_path = rec["tile_path"]
        if tile_path and not os.path.isabs(tile_path):
            tile_path = str(base / tile_path)
        row = ManifestRow(
            tile_path=tile_path,
            tile_id=rec["tile_id"],
            patient_id=rec["patient_id"],
            label=Label.parse(rec["label"]),
            source_id=rec.get("source_id") or "",
            dx=_opt_int(rec.get("dx") or ""),
            dy=_opt_int(rec.get("dy") or ""),
            theta=_opt_float(rec.get("theta") or ""),
        )
        if row.tile_id in seen:
            raise ConfigError(f"{path}: duplicate tile_id {row.tile_id!r}")
        seen.add(row.tile_id)
        rows.append(row)
    return rows


def manifest_text(rows: Iterable[ManifestRow], relative_to: str | os.PathLike | None = None) -> str:
    buf = io.StringIO()
    buf.write(FORMAT_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MANIFEST_COLUMNS)
    for row in rows:
        rec = row.as_record()
        if relative_to is not None and rec[0]:
            rec[0] = os.path.relpath(rec[0], relative_to)
        w.writerow(rec)
    return buf.getvalue()


def write_manifest(path: str | os.PathLike, rows: Iterable[ManifestRow]) -> None:
    write_text_atomic(path, manifest_text(rows, relative_to=Path(path).parent))


@contextlib.contextmanager
def atomic_write(path: str | os.PathLike, mode: str = "w"):
    """Write to a sibling temp file and rename into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        kwargs = {"newline": "", "encoding": "utf-8"} if "b" not in mode else {}
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_text_atomic(path: str | os.PathLike, text: str) -> None:
    with atomic_write(path) as fh:
        fh.write(text)


def format_real(value: float) -> str:
    """Nine significant digits, the precision used in every numeric CSV."""
    return f"{float(value):.9g}"
