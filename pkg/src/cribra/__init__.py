"""Nuclei-feature extraction, tile augmentation, SVM/MLP classifiers and a
patient-exclusive cross-validation harness for cribriform pattern detection."""

from .augmentation import AugmentationGrid, RejectionPolicy, enumerate_variants, sample_augmented
from .errors import ConfigError, CribraError, DataError
from .evaluation import FoldPlan, FoldReport, build_fold_plan, run_cv, sample_balanced, summarize
from .graph import delaunay, mst
from .image_io import Tile, downscale, extract_region, load_tile, save_tile, to_gray
from .local_features import aggregate, local_feature_block, radial_measures, shape_measures
from .manifest import Label, ManifestRow, read_manifest, write_manifest
from .segmentation import SegConfig, image_occupied_area, otsu_threshold, segment_nuclei
from .spatial_features import FEATURE_COLUMNS, N_FEATURES, FeatureVector, assemble_features, tile_features

__version__ = "0.1.0"

__all__ = [
    "AugmentationGrid",
    "ConfigError",
    "CribraError",
    "DataError",
    "FEATURE_COLUMNS",
    "FeatureVector",
    "FoldPlan",
    "FoldReport",
    "Label",
    "ManifestRow",
    "N_FEATURES",
    "RejectionPolicy",
    "SegConfig",
    "Tile",
    "aggregate",
    "assemble_features",
    "build_fold_plan",
    "delaunay",
    "downscale",
    "enumerate_variants",
    "extract_region",
    "image_occupied_area",
    "load_tile",
    "local_feature_block",
    "mst",
    "otsu_threshold",
    "radial_measures",
    "read_manifest",
    "run_cv",
    "sample_augmented",
    "sample_balanced",
    "save_tile",
    "segment_nuclei",
    "shape_measures",
    "summarize",
    "tile_features",
    "to_gray",
    "write_manifest",
]
