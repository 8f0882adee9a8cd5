import math
import time

import numpy as np
import pytest
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial import Delaunay as ScipyDelaunay
from scipy.spatial.distance import pdist, squareform

from cribra.image_io import Tile, to_gray
from cribra.local_features import local_feature_block
from cribra.manifest import Label
from cribra.segmentation import DEFAULT_SEG, segment_nuclei
from cribra.spatial_features import (FEATURE_COLUMNS, FEATURE_GROUPS, N_FEATURES, FeatureVector, assemble_features,
                                     feature_header_text, feature_row_text, read_features, tile_features)
from cribra.synthgen import SynthSpec, generate


def _stats(v):
    v = [float(x) for x in v]
    mu = sum(v) / len(v)
    sd = math.sqrt(sum((x - mu) ** 2 for x in v) / len(v))
    dis = 1 - 1 / (1 + mu / sd) if sd > 0 else (1.0 if mu > 0 else 0.0)
    return [mu, sd, dis, min(v) / max(v)]


def test_layout():
    assert N_FEATURES == len(FEATURE_COLUMNS) == 57
    assert len(set(FEATURE_COLUMNS)) == 57
    assert [len(g) for g in FEATURE_GROUPS.values()] == [5, 20, 20, 4, 8]
    assert sum(FEATURE_GROUPS.values(), ()) == FEATURE_COLUMNS
    assert FEATURE_COLUMNS[0] == "nuclei_count"
    assert FEATURE_COLUMNS[45:49] == ("mst_edge_mean", "mst_edge_std", "mst_edge_disorder", "mst_edge_minmax")


def test_blank_tile_is_all_zero():
    fv = tile_features(Tile(np.full((64, 64, 3), 255, np.uint8)))
    assert not fv.valid
    assert fv.values.shape == (57,) and not fv.values.any()


def test_two_nuclei():
    px = np.full((64, 64, 3), 255, np.uint8)
    px[10:16, 10:16] = 0
    px[40:46, 10:16] = 0
    fv = tile_features(Tile(px), DEFAULT_SEG.__class__(min_area=4, max_area=200))
    assert not fv.valid
    d = fv.as_dict()
    assert d["nuclei_count"] == 2
    assert fv.values[45:49].tolist() == [30.0, 0.0, 1.0, 1.0]
    assert not fv.values[49:].any()


@pytest.mark.parametrize("label", [Label.CRIBRIFORM, Label.NON_CRIBRIFORM])
def test_full_vector_against_independent_recomputation(label):
    tile, _ = generate(SynthSpec(seed=21, label=label))
    img = to_gray(tile)
    seg = segment_nuclei(img, DEFAULT_SEG.scaled(tile.width))
    fv = assemble_features(seg, img)
    assert fv.valid
    c = np.array([o.centroid for o in seg.objects])
    tree = minimum_spanning_tree(squareform(pdist(c))).tocoo()
    want_mst = _stats(tree.data)
    simp = ScipyDelaunay(c).simplices
    areas, perims = [], []
    for i, j, k in simp:
        a, b, d = c[i], c[j], c[k]
        areas.append(abs((b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0])) / 2)
        perims.append(math.dist(a, b) + math.dist(b, d) + math.dist(d, a))
    want = local_feature_block(seg, img) + want_mst + _stats(areas) + _stats(perims)
    assert np.allclose(fv.values, want, rtol=1e-9, atol=1e-9)


def test_feature_csv_round_trip(tmp_path, rng):
    vs = [FeatureVector(rng.normal(size=57) * 10.0 ** rng.integers(-5, 5), bool(k % 2), f"t{k}", "P1",
                        Label.CRIBRIFORM if k % 2 else Label.NON_CRIBRIFORM) for k in range(5)]
    path = tmp_path / "f.csv"
    path.write_text(feature_header_text() + "".join(feature_row_text(v) for v in vs))
    back = read_features(path)
    for a, b in zip(vs, back):
        # nine significant digits on disk; a second pass is exact
        assert np.allclose(a.values, b.values, rtol=1e-8, atol=0)
        assert feature_row_text(a) == feature_row_text(b)
        assert (a.valid, a.tile_id, a.patient_id, a.label) == (b.valid, b.tile_id, b.patient_id, b.label)


def test_feature_vector_shape_checked():
    with pytest.raises(ValueError):
        FeatureVector(np.zeros(56), True)


def test_disorder_convention_only_changes_disorder_slots():
    tile, _ = generate(SynthSpec(seed=4, label=Label.CRIBRIFORM))
    a = tile_features(tile).values
    b = tile_features(tile, disorder_convention="cv").values
    disorder_slots = [i for i, n in enumerate(FEATURE_COLUMNS) if n.endswith("_disorder")]
    other = np.setdiff1d(np.arange(57), disorder_slots)
    assert np.array_equal(a[other], b[other])
    assert not np.array_equal(a[disorder_slots], b[disorder_slots])


def test_tile_speed():
    tile, _ = generate(SynthSpec(seed=8, label=Label.CRIBRIFORM))
    tile_features(tile)
    t0 = time.perf_counter()
    tile_features(tile)
    assert time.perf_counter() - t0 < 1.0
