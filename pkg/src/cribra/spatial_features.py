"""Centroid-graph features (MST edges, Delaunay triangles) and assembly of
the full 57-value nuclei feature vector."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateCollinear, DegenerateImage, TooFewPoints
from .graph import dedupe_points, delaunay, mst
from .local_features import LOCAL_COLUMNS, STAT_NAMES, aggregate, block_from_measurements, object_measurements
from .manifest import FORMAT_LINE, Label, format_real, iter_csv
from .image_io import to_gray
from .segmentation import DEFAULT_SEG, SegmentationResult, segment_nuclei

MST_COLUMNS = [f"mst_edge_{s}" for s in STAT_NAMES]
DELAUNAY_COLUMNS = [f"dt_area_{s}" for s in STAT_NAMES] + [f"dt_perimeter_{s}" for s in STAT_NAMES]
FEATURE_COLUMNS = tuple(LOCAL_COLUMNS + MST_COLUMNS + DELAUNAY_COLUMNS)
N_FEATURES = len(FEATURE_COLUMNS)

# Feature groups and their widths: count/area, radial, shape, MST, Delaunay
FEATURE_GROUPS = {
    "count_area": FEATURE_COLUMNS[0:5],
    "radial_intensity": FEATURE_COLUMNS[5:25],
    "size_shape": FEATURE_COLUMNS[25:45],
    "mst": FEATURE_COLUMNS[45:49],
    "delaunay": FEATURE_COLUMNS[49:57],
}

META_COLUMNS = ("tile_id", "patient_id", "label", "valid")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    valid: bool
    tile_id: str = ""
    patient_id: str = ""
    label: Label = Label.UNLABELED

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have {N_FEATURES} values, got {v.shape}")
        object.__setattr__(self, "values", v)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_COLUMNS, self.values.tolist()))


def spatial_blocks(centroids, disorder_convention: str = "snr") -> tuple[list[float], list[float], bool]:
    """MST (4) and Delaunay (8) blocks from centroids; zero-filled when degenerate."""
    pts = dedupe_points(centroids)
    ok = True
    try:
        tree = mst(pts)
        mst_block = list(aggregate(tree.weights, disorder_convention))
    except TooFewPoints:
        mst_block, ok = [0.0] * 4, False
    try:
        tri = delaunay(pts)
        dt_block = (list(aggregate(tri.areas(), disorder_convention))
                    + list(aggregate(tri.perimeters(), disorder_convention)))
    except (TooFewPoints, DegenerateCollinear):
        dt_block, ok = [0.0] * 8, False
    return mst_block, dt_block, ok


def assemble_from_measurements(records, disorder_convention: str = "snr") -> tuple[np.ndarray, bool]:
    if not records:
        return np.zeros(N_FEATURES), False
    local = block_from_measurements(records, disorder_convention)
    mst_block, dt_block, ok = spatial_blocks([(r["cx"], r["cy"]) for r in records], disorder_convention)
    return np.array(local + mst_block + dt_block, dtype=np.float64), ok


def assemble_features(seg: SegmentationResult, img=None, disorder_convention: str = "snr",
                      tile_id: str = "", patient_id: str = "", label: Label = Label.UNLABELED) -> FeatureVector:
    """Full feature vector for one segmented tile.

    Degenerate tiles (no nuclei, fewer than 2 for the MST, fewer than 3 or
    collinear for the triangulation) get the affected blocks zero-filled and
    ``valid=False``.
    """
    records = [object_measurements(o) for o in seg.objects]
    values, ok = assemble_from_measurements(records, disorder_convention)
    return FeatureVector(values, ok, tile_id or seg.source_id, patient_id, label)


def tile_features(tile, seg_cfg=None, disorder_convention: str = "snr", return_seg: bool = False):
    """Gray conversion, segmentation and feature assembly for a :class:`Tile`."""
    gray = to_gray(tile)
    cfg = seg_cfg if seg_cfg is not None else DEFAULT_SEG.scaled(tile.width)
    try:
        seg = segment_nuclei(gray, cfg, source_id=tile.id)
    except DegenerateImage:
        seg = SegmentationResult([], float("nan"), gray.shape, tile.id)
    fv = assemble_features(seg, gray, disorder_convention, tile.id, tile.patient_id, tile.label)
    return (fv, seg) if return_seg else fv


# --- feature CSV -----------------------------------------------------------------

HEADER = list(META_COLUMNS) + list(FEATURE_COLUMNS)


def feature_header_text() -> str:
    buf = io.StringIO()
    buf.write(FORMAT_LINE + "\n")
    csv.writer(buf, lineterminator="\n").writerow(HEADER)
    return buf.getvalue()


def feature_row_text(fv: FeatureVector) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(
        [fv.tile_id, fv.patient_id, fv.label.value, int(fv.valid)]
        + [format_real(v) for v in fv.values]
    )
    return buf.getvalue()


def read_features(path) -> list[FeatureVector]:
    out = []
    for rec in iter_csv(path):
        missing = [c for c in HEADER if c not in rec]
        if missing:
            raise ConfigError(f"{path}: feature CSV lacks columns {missing[:3]}...")
        out.append(FeatureVector(
            np.array([float(rec[c]) for c in FEATURE_COLUMNS]),
            rec["valid"].strip() in ("1", "true", "True"),
            rec["tile_id"],
            rec["patient_id"],
            Label.parse(rec["label"]),
        ))
    return out
