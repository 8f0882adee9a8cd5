"""Precomputed deep-embedding files and their concatenation with nuclei features.

Embedding file layout::

    #dim=D
    tile_id,v1,...,vD
    ...

A header row naming the columns is optional; further ``#`` lines are ignored.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, MissingEmbedding, WidthMismatch
from ..manifest import write_text_atomic
from ..spatial_features import N_FEATURES


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    path: str
    dim: int
    vectors: dict[str, np.ndarray]

    @property
    def name(self) -> str:
        return os.path.basename(self.path)

    def lookup(self, tile_id: str) -> np.ndarray:
        try:
            return self.vectors[tile_id]
        except KeyError:
            raise MissingEmbedding(tile_id, self.path) from None


def read_embeddings(path: str | os.PathLike) -> EmbeddingTable:
    path = str(path)
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("#dim="):
            raise ConfigError(f"{path}: first line must be '#dim=D', got {first[:40]!r}")
        try:
            dim = int(first[len("#dim="):])
        except ValueError:
            raise ConfigError(f"{path}: bad dimension line {first!r}") from None
        vectors: dict[str, np.ndarray] = {}
        for lineno, rec in enumerate(csv.reader(line for line in fh if not line.startswith("#")), start=2):
            if not rec:
                continue
            if rec[0] == "tile_id" and not vectors:
                continue
            if len(rec) - 1 != dim:
                raise WidthMismatch(f"{path}:{lineno}: {len(rec) - 1} values, header declares {dim}")
            if rec[0] in vectors:
                raise ConfigError(f"{path}: duplicate tile_id {rec[0]!r}")
            vectors[rec[0]] = np.array([float(v) for v in rec[1:]], dtype=np.float64)
    return EmbeddingTable(path, dim, vectors)


def write_embeddings(path, ids, matrix) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    buf = io.StringIO()
    buf.write(f"#dim={matrix.shape[1]}\n")
    w = csv.writer(buf, lineterminator="\n")
    for tid, row in zip(ids, matrix):
        w.writerow([tid] + [repr(float(v)) for v in row])
    write_text_atomic(path, buf.getvalue())


def fuse(features, tile_id: str, tables: list[EmbeddingTable] = ()) -> np.ndarray:
    """Nuclei features first, then each embedding table in declaration order."""
    vals = getattr(features, "values", features)
    parts = [np.asarray(vals, dtype=np.float64).ravel()]
    for t in tables:
        v = t.lookup(tile_id)
        if v.size != t.dim:
            raise WidthMismatch(f"{t.path}: vector for {tile_id!r} has {v.size} values, expected {t.dim}")
        parts.append(v)
    return np.concatenate(parts)


def fused_width(n_features: int, tables: list[EmbeddingTable] = ()) -> int:
    return n_features + sum(t.dim for t in tables)


def fused_matrix(feature_vectors, tables: list[EmbeddingTable] = ()) -> np.ndarray:
    if not feature_vectors:
        return np.zeros((0, fused_width(N_FEATURES, tables)))
    return np.vstack([fuse(fv, fv.tile_id, tables) for fv in feature_vectors])
