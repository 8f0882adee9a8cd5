"""Translation x rotation resampling around an annotated tile location.

With the default grid (offsets of 0, +-50, +-100 px on each axis and
rotations of 0, 60, 120 degrees) one source location yields 75 variants.
A variant is centred at ``origin + (dx, dy)`` and rotated about that centre.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .image_io import Rejection, Tile, Transform, extract_region


@dataclass(frozen=True)
class AugmentationGrid:
    delta: int = 50
    k_max: int = 2
    thetas: tuple[float, ...] = (0.0, 60.0, 120.0)
    side: int = 1024

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.k_max < 0:
            raise ValueError("k_max must be >= 0")
        if not self.thetas or any(not (0 <= t < 360) for t in self.thetas):
            raise ValueError("thetas must be a non-empty list of angles in [0, 360)")
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))

    @property
    def offsets(self) -> list[int]:
        return [k * self.delta for k in range(-self.k_max, self.k_max + 1)]

    @property
    def n_variants(self) -> int:
        return (2 * self.k_max + 1) ** 2 * len(self.thetas)


@dataclass(frozen=True)
class RejectionPolicy:
    max_blank_fraction: float = 0.90
    blank_luminance: int = 240
    allow_out_of_bounds: bool = False

    def __post_init__(self):
        if not 0.0 <= self.max_blank_fraction <= 1.0:
            raise ValueError("max_blank_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class Variant:
    dx: int
    dy: int
    theta: float
    center: tuple[float, float]


@dataclass(frozen=True)
class RejectedVariant:
    source_id: str
    dx: int
    dy: int
    theta: float
    reason: str


@dataclass
class AugmentationResult:
    accepted: list[Tile] = field(default_factory=list)
    rejected: list[RejectedVariant] = field(default_factory=list)


def enumerate_variants(grid: AugmentationGrid, origin: tuple[float, float]) -> list[Variant]:
    """Every (x offset, y offset, theta) combination, x-major then y then theta."""
    x0, y0 = origin
    return [
        Variant(dx, dy, theta, (x0 + dx, y0 + dy))
        for dx, dy, theta in itertools.product(grid.offsets, grid.offsets, grid.thetas)
    ]


def blank_fraction(pixels: np.ndarray, blank_luminance: int = 240) -> float:
    """Share of pixels whose darkest channel is still >= ``blank_luminance``."""
    return float(np.mean(pixels.min(axis=2) >= blank_luminance))


def variant_id(source_id: str, v: Variant) -> str:
    return f"{source_id}_dx{v.dx:+d}_dy{v.dy:+d}_r{v.theta:g}"


def _extract_padded(context: Tile, center, side, theta):
    """Out-of-bounds-tolerant extraction: pad with white and sample again."""
    pad = int(np.ceil(side * 0.75)) + 2
    big = np.pad(context.pixels, ((pad, pad), (pad, pad), (0, 0)), constant_values=255)
    padded = Tile(big, id=context.id, patient_id=context.patient_id, label=context.label,
                  source_id=context.source_id)
    return extract_region(padded, (center[0] + pad, center[1] + pad), side, theta, thetas=None)


def sample_augmented(context: Tile, grid: AugmentationGrid, origin: tuple[float, float],
                     policy: RejectionPolicy = RejectionPolicy(), source_id: str | None = None) -> AugmentationResult:
    """Extract all grid variants, rejecting out-of-bounds or mostly blank ones."""
    source_id = source_id or context.source_id or context.id
    result = AugmentationResult()
    for v in enumerate_variants(grid, origin):
        tile = extract_region(context, v.center, grid.side, v.theta, thetas=grid.thetas)
        if isinstance(tile, Rejection):
            if not policy.allow_out_of_bounds:
                result.rejected.append(RejectedVariant(source_id, v.dx, v.dy, v.theta, tile.reason))
                continue
            tile = _extract_padded(context, v.center, grid.side, v.theta)
        frac = blank_fraction(tile.pixels, policy.blank_luminance)
        if frac > policy.max_blank_fraction:
            result.rejected.append(RejectedVariant(source_id, v.dx, v.dy, v.theta, "Blank"))
            continue
        result.accepted.append(Tile(
            tile.pixels,
            id=variant_id(source_id, v),
            patient_id=context.patient_id,
            label=context.label,
            transform=Transform(v.dx, v.dy, v.theta),
            source_id=source_id,
        ))
    return result
