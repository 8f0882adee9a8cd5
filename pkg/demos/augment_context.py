"""
Shifted and rotated crops around an origin
==========================================

A 5 x 5 grid of offsets times three angles yields 75 candidate tiles.
Candidates that leave the image or are mostly white are rejected.
"""

import numpy as np

from cribra.augmentation import AugmentationGrid, sample_augmented
from cribra.image_io import Tile
from cribra.synthgen import SynthSpec, generate

# stitch a 4 x 4 mosaic of synthetic tiles into a 1024 px context
tiles = [generate(SynthSpec(seed=(9, i)))[0].pixels for i in range(16)]
mosaic = np.concatenate([np.concatenate(tiles[r * 4:(r + 1) * 4], axis=1) for r in range(4)], axis=0)
mosaic[:, 640:] = 255  # right-hand third is glass
ctx = Tile(mosaic, id="ctx")

grid = AugmentationGrid(delta=25, side=256)
print(grid.n_variants, "variants per origin")

for origin in [(400, 512), (830, 512), (150, 150)]:
    res = sample_augmented(ctx, grid, origin)
    reasons = sorted({r.reason for r in res.rejected})
    print(origin, "accepted", len(res.accepted), "rejected", len(res.rejected), reasons)

print(res.accepted[0].id if res.accepted else "nothing accepted at the corner")
