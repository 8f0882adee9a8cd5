from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, NonFiniteFeature


def check_rows(X, width: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D feature matrix, got shape {X.shape}")
    if width is not None and X.shape[1] != width:
        raise DimensionMismatch(f"feature width {X.shape[1]} does not match model width {width}")
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise NonFiniteFeature(f"non-finite value at row {bad[0]}, column {bad[1]}")
    return X


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Column z-scoring fitted on training rows only.

    Zero-variance columns get std 1 and are flagged in ``constant``.
    """

    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = check_rows(X)
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        constant = ~(stds > 0)
        stds = np.where(constant, 1.0, stds)
        return cls(means, stds, constant)

    @property
    def width(self) -> int:
        return int(self.means.size)

    def transform(self, X) -> np.ndarray:
        X = check_rows(X, self.width)
        return (X - self.means) / self.stds

    def to_dict(self) -> dict:
        return {
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "constant": [bool(c) for c in self.constant],
        }

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(np.asarray(d["means"], dtype=np.float64), np.asarray(d["stds"], dtype=np.float64),
                   np.asarray(d["constant"], dtype=bool))
