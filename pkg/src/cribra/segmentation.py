"""Nuclei identification: global Otsu threshold, 4-connected labelling,
hole filling and size filtering."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .errors import DegenerateImage

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class SegConfig:
    """Object-size window in pixels at ``native_side`` resolution.

    ``dark_foreground`` selects nuclei as the pixels *below* the threshold
    (hematoxylin is dark in luminance).
    """

    min_area: float = 40.0
    max_area: float = 5000.0
    native_side: int = 1024
    dark_foreground: bool = True

    def scaled(self, side: int) -> "SegConfig":
        """Rescale the area window for a tile of ``side`` pixels."""
        f = (side / self.native_side) ** 2
        return replace(self, min_area=self.min_area * f, max_area=self.max_area * f, native_side=side)


DEFAULT_SEG = SegConfig()


@dataclass(frozen=True, eq=False)
class NucleusObject:
    id: int
    rows: np.ndarray
    cols: np.ndarray
    intensities: np.ndarray

    @property
    def area(self) -> int:
        return int(self.rows.size)

    @property
    def centroid(self) -> tuple[float, float]:
        """(x, y) = (mean column, mean row)."""
        return float(self.cols.mean()), float(self.rows.mean())

    @property
    def mean_gray(self) -> float:
        return float(self.intensities.mean())

    @property
    def pixels(self) -> list[tuple[int, int]]:
        return list(zip(self.rows.tolist(), self.cols.tolist()))


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    objects: list[NucleusObject]
    threshold_used: float
    shape: tuple[int, int]
    source_id: str = ""
    labels: np.ndarray | None = field(default=None, repr=False)

    def label_image(self) -> np.ndarray:
        """Integer label image, 0 = background, object k -> k + 1."""
        if self.labels is not None:
            return self.labels
        out = np.zeros(self.shape, dtype=np.int32)
        for k, obj in enumerate(self.objects):
            out[obj.rows, obj.cols] = k + 1
        return out


def _between_class_variance(hist: np.ndarray) -> np.ndarray:
    """sigma_B^2 for the split {bins <= k} | {bins > k}, k = 0..254."""
    levels = np.arange(hist.size, dtype=np.float64)
    total = hist.sum()
    w0 = np.cumsum(hist)[:-1]
    s0 = np.cumsum(hist * levels)[:-1]
    w1 = total - w0
    s1 = (hist * levels).sum() - s0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = s0 / w0
        mu1 = s1 / w1
        var = w0 * w1 * (mu0 - mu1) ** 2 / total**2
    var[(w0 == 0) | (w1 == 0)] = -1.0
    return var


def gray_histogram(img: np.ndarray) -> np.ndarray:
    bins = np.clip(np.floor(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.intp)
    return np.bincount(bins.ravel(), minlength=256).astype(np.float64)


def otsu_threshold(img: np.ndarray) -> float:
    """Global Otsu threshold over the 256-bin histogram.

    Returns ``t`` such that the dark class is exactly ``img < t``; ties in
    between-class variance go to the smallest ``t``.
    """
    hist = gray_histogram(img)
    if np.count_nonzero(hist) < 2:
        raise DegenerateImage("image has a single intensity level")
    var = _between_class_variance(hist)
    best = var.max()
    k = int(np.flatnonzero(var >= best - 1e-12 * best)[0])
    return float(k + 1)


def segment_nuclei(img: np.ndarray, cfg: SegConfig = DEFAULT_SEG, source_id: str = "") -> SegmentationResult:
    """Label nuclei in a luminance image.

    Foreground holes are filled (background components not 4-connected to
    the border), then 4-connected components outside
    ``[cfg.min_area, cfg.max_area]`` are discarded.
    """
    img = np.asarray(img, dtype=np.float64)
    t = otsu_threshold(img)
    fg = img < t if cfg.dark_foreground else img >= t
    fg = ndimage.binary_fill_holes(fg, structure=FOUR_CONNECTED)
    labels, n = ndimage.label(fg, structure=FOUR_CONNECTED)
    if n == 0:
        return SegmentationResult([], t, img.shape, source_id, np.zeros(img.shape, np.int32))
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    keep = (areas >= cfg.min_area) & (areas <= cfg.max_area)
    keep[0] = False
    remap = np.zeros(n + 1, dtype=np.int32)
    remap[keep] = np.arange(1, int(keep.sum()) + 1)
    labels = remap[labels]

    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=int(keep.sum()) + 1)
    starts = np.concatenate([[0], np.cumsum(counts)])
    rr, cc = np.divmod(order, img.shape[1])
    vals = img.ravel()[order]
    objects = []
    for k in range(1, counts.size):
        sl = slice(starts[k], starts[k + 1])
        objects.append(NucleusObject(k - 1, rr[sl], cc[sl], vals[sl]))
    return SegmentationResult(objects, t, img.shape, source_id, labels)


def image_occupied_area(seg: SegmentationResult, img: np.ndarray | None = None) -> float:
    """Fraction of the image covered by segmented nuclei."""
    h, w = seg.shape if img is None else np.asarray(img).shape[:2]
    return sum(o.area for o in seg.objects) / float(h * w)


def debug_label_png(seg: SegmentationResult) -> np.ndarray:
    """uint8 label rendering: object k -> (k mod 255) + 1, background 0."""
    lab = seg.label_image()
    out = np.zeros(lab.shape, dtype=np.uint8)
    fg = lab > 0
    out[fg] = ((lab[fg] - 1) % 255 + 1).astype(np.uint8)
    return out
