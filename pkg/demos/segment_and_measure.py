"""
From a tile to 57 numbers
=========================

Render one synthetic gland tile of each class, segment its nuclei and
summarise them as the 57-value feature vector.
"""

import numpy as np

from cribra.image_io import to_gray
from cribra.manifest import Label
from cribra.segmentation import DEFAULT_SEG, otsu_threshold, segment_nuclei
from cribra.spatial_features import FEATURE_COLUMNS, FEATURE_GROUPS, tile_features
from cribra.synthgen import SynthSpec, generate

for label in (Label.CRIBRIFORM, Label.NON_CRIBRIFORM):
    tile, truth = generate(SynthSpec(seed=7, label=label))
    gray = to_gray(tile)

    # Otsu picks the split between dark nuclei and everything else
    t = otsu_threshold(gray)
    seg = segment_nuclei(gray, DEFAULT_SEG.scaled(tile.width))
    print(f"{label.value}: threshold {t:.0f}, {len(seg.objects)} nuclei found, {truth.n_nuclei} planted")

    fv = tile_features(tile)
    for group, cols in FEATURE_GROUPS.items():
        idx = [FEATURE_COLUMNS.index(c) for c in cols]
        print(f"  {group:17s} {np.array2string(fv.values[idx][:4], precision=3)} ...")

# Column order is frozen; write it once to see it
print(len(FEATURE_COLUMNS), "columns:", ", ".join(FEATURE_COLUMNS[:6]), "...")
