"""Per-nucleus measurements and their image-level summary statistics.

Every measurement list is reduced to four numbers: mean, population
standard deviation, disorder and min/max ratio.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .errors import EmptyInput, NoNuclei
from .segmentation import NucleusObject, SegmentationResult

STAT_NAMES = ("mean", "std", "disorder", "minmax")
RADIAL_NAMES = ("mean_int", "ring1", "ring2", "ring3", "ring4")
SHAPE_NAMES = ("minor_axis", "major_axis", "eccentricity", "orientation", "solidity")
N_RINGS = 4

LOCAL_COLUMNS = (
    ["nuclei_count"]
    + [f"area_{s}" for s in STAT_NAMES]
    + [f"radial_{m}_{s}" for m in RADIAL_NAMES for s in STAT_NAMES]
    + [f"shape_{m}_{s}" for m in SHAPE_NAMES for s in STAT_NAMES]
)


class StatVector(NamedTuple):
    mean: float
    std: float
    disorder: float
    minmax_ratio: float


class ShapeMeasures(NamedTuple):
    minor_axis: float
    major_axis: float
    eccentricity: float
    orientation: float
    solidity: float


class RadialMeasures(NamedTuple):
    mean_intensity: float
    ring_means: tuple[float, float, float, float]

    def as_tuple(self) -> tuple[float, ...]:
        return (self.mean_intensity, *self.ring_means)


def aggregate(values: Sequence[float], disorder_convention: str = "snr") -> StatVector:
    """Mean, population std, disorder and min/max ratio of non-negative values.

    ``disorder_convention="snr"`` uses 1 - 1/(1 + mean/std); ``"cv"`` uses
    1 - 1/(1 + std/mean). When std is 0 the snr form is 1 for a positive
    mean and 0 for an all-zero list.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInput("aggregate() needs at least one value")
    mu = float(v.mean())
    sigma = float(np.sqrt(np.mean((v - mu) ** 2)))
    if v.min() == v.max():
        sigma = 0.0
    if disorder_convention == "snr":
        if sigma > 0:
            disorder = 1.0 - 1.0 / (1.0 + mu / sigma)
        else:
            disorder = 1.0 if mu > 0 else 0.0
    elif disorder_convention == "cv":
        disorder = 1.0 - 1.0 / (1.0 + sigma / mu) if mu > 0 else 0.0
    else:
        raise ValueError(f"unknown disorder convention {disorder_convention!r}")
    vmax = float(v.max())
    minmax = float(v.min()) / vmax if vmax > 0 else 1.0
    if v.min() == v.max():
        minmax = 1.0
    return StatVector(mu, sigma, disorder, minmax)


def _hull(xs: np.ndarray, ys: np.ndarray) -> list[tuple[float, float]]:
    """Convex hull vertices, counter-clockwise (monotone chain)."""
    pts = sorted(set(zip(xs.tolist(), ys.tolist())))
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _corner_hull(rows: np.ndarray, cols: np.ndarray) -> list[tuple[float, float]]:
    # only the leftmost/rightmost pixel of each row can contribute hull corners
    order = np.lexsort((cols, rows))
    r, c = rows[order], cols[order]
    first = np.r_[True, r[1:] != r[:-1]]
    last = np.r_[r[1:] != r[:-1], True]
    c_lo = c[first] - 0.5
    c_hi = c[last] + 0.5
    xs = np.concatenate([c_lo, c_lo, c_hi, c_hi])
    ys = np.concatenate([r[first] - 0.5, r[first] + 0.5, r[last] - 0.5, r[last] + 0.5])
    return _hull(xs, ys)


def corner_hull_area(rows: np.ndarray, cols: np.ndarray) -> float:
    """Area of the convex hull of the object's unit pixel squares."""
    hull = _corner_hull(rows, cols)
    area = 0.0
    for (x0, y0), (x1, y1) in zip(hull, hull[1:] + hull[:1]):
        area += x0 * y1 - x1 * y0
    return abs(area) / 2.0


def shape_measures(obj: NucleusObject) -> ShapeMeasures:
    """Ellipse-equivalent axes, eccentricity, orientation and solidity.

    Axes are 4*sqrt(eigenvalue) of the pixel-coordinate covariance, with a
    1/12 per-axis term for the extent of each unit pixel. Orientation is
    measured from the +x (column) axis in (-pi/2, pi/2]. Solidity is the
    pixel count over the area of the hull of the pixel squares.
    """
    x = obj.cols.astype(np.float64)
    y = obj.rows.astype(np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    mu20 = float(np.mean(dx * dx)) + 1.0 / 12.0
    mu02 = float(np.mean(dy * dy)) + 1.0 / 12.0
    mu11 = float(np.mean(dx * dy))
    half_tr = (mu20 + mu02) / 2.0
    root = math.hypot((mu20 - mu02) / 2.0, mu11)
    lam1 = half_tr + root
    lam2 = max(half_tr - root, 0.0)
    major = 4.0 * math.sqrt(lam1)
    minor = 4.0 * math.sqrt(lam2)
    ecc = math.sqrt(max(0.0, 1.0 - lam2 / lam1)) if lam1 > 0 else 0.0
    if mu11 == 0.0 and mu20 == mu02:
        orientation = 0.0
    else:
        orientation = 0.5 * math.atan2(2.0 * mu11, mu20 - mu02)
    if orientation <= -math.pi / 2:
        orientation += math.pi
    solidity = min(1.0, obj.area / corner_hull_area(obj.rows, obj.cols))
    return ShapeMeasures(minor, major, ecc, orientation, solidity)


def radial_measures(obj: NucleusObject, n_rings: int = N_RINGS) -> RadialMeasures:
    """Mean intensity overall and in equal-width normalised-radius rings."""
    vals = np.asarray(obj.intensities, dtype=np.float64)
    overall = float(vals.mean())
    cx, cy = obj.centroid
    d = np.hypot(obj.cols - cx, obj.rows - cy)
    dmax = d.max()
    r = d / dmax if dmax > 0 else np.zeros_like(d)
    ring = np.minimum(np.floor(n_rings * r).astype(np.intp), n_rings - 1)
    sums = np.bincount(ring, weights=vals, minlength=n_rings)
    counts = np.bincount(ring, minlength=n_rings)
    means = tuple(float(s / n) if n else overall for s, n in zip(sums, counts))
    return RadialMeasures(overall, means)


def object_measurements(obj: NucleusObject) -> dict[str, float]:
    """Flat per-object record, the same fields as the object dump CSV."""
    cx, cy = obj.centroid
    sh = shape_measures(obj)
    rad = radial_measures(obj)
    return {
        "id": obj.id,
        "cx": cx,
        "cy": cy,
        "area": float(obj.area),
        "minor": sh.minor_axis,
        "major": sh.major_axis,
        "ecc": sh.eccentricity,
        "orient": sh.orientation,
        "solidity": sh.solidity,
        "mean_int": rad.mean_intensity,
        "ring1": rad.ring_means[0],
        "ring2": rad.ring_means[1],
        "ring3": rad.ring_means[2],
        "ring4": rad.ring_means[3],
    }


OBJECT_DUMP_COLUMNS = ("id", "cx", "cy", "area", "minor", "major", "ecc", "orient", "solidity",
                       "mean_int", "ring1", "ring2", "ring3", "ring4")


def block_from_measurements(records: Sequence[dict], disorder_convention: str = "snr") -> list[float]:
    """The 45-value local block from per-object measurement records."""
    if not records:
        raise NoNuclei("no nuclei to summarise")
    out = [float(len(records))]

    def stats(key):
        return list(aggregate([r[key] for r in records], disorder_convention))

    out += stats("area")
    for key in ("mean_int", "ring1", "ring2", "ring3", "ring4"):
        out += stats(key)
    for key in ("minor", "major", "ecc"):
        out += stats(key)
    # orientation is signed; shift into (0, pi] so the non-negative stats apply
    orient = [r["orient"] + math.pi / 2 for r in records]
    out += list(aggregate(orient, disorder_convention))
    out += stats("solidity")
    return out


def local_feature_block(seg: SegmentationResult, img=None, disorder_convention: str = "snr") -> list[float]:
    """Count/area (5), radial intensity (20) and size/shape (20) features."""
    if not seg.objects:
        raise NoNuclei("segmentation produced no nuclei")
    return block_from_measurements([object_measurements(o) for o in seg.objects], disorder_convention)
