"""
Spanning trees and triangulations over nuclei
=============================================

Cribriform glands pack nuclei tightly, so their MST edges are short and
their Delaunay triangles small.
"""

from cribra.graph import delaunay, mst
from cribra.local_features import aggregate
from cribra.manifest import Label
from cribra.spatial_features import tile_features
from cribra.synthgen import SynthSpec, generate

for label in (Label.CRIBRIFORM, Label.NON_CRIBRIFORM):
    tile, _ = generate(SynthSpec(seed=3, label=label))
    _, seg = tile_features(tile, return_seg=True)
    pts = [o.centroid for o in seg.objects]

    tree = mst(pts)
    tri = delaunay(pts)
    print(f"{label.value}: {len(pts)} centroids")
    print(f"  MST   {len(tree.edges)} edges, total length {tree.total_weight:.1f}")
    print(f"        edge stats {aggregate(tree.weights)}")
    print(f"  Delaunay {len(tri.triangles)} triangles")
    print(f"        area stats {aggregate(tri.areas())}")

# Four values summarise every list: mean, std, disorder and min/max
print(aggregate([1.0, 3.0]))
