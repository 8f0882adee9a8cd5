import numpy as np
import pytest

from cribra.classifiers.fusion import fuse, fused_matrix, fused_width, read_embeddings, write_embeddings
from cribra.errors import ConfigError, MissingEmbedding, WidthMismatch
from cribra.manifest import Label
from cribra.spatial_features import FeatureVector


def _vectors(rng, ids):
    return [FeatureVector(rng.normal(size=57), True, t, "P1", Label.CRIBRIFORM) for t in ids]


@pytest.fixture
def tables(tmp_path, rng):
    ids = ["a", "b", "c"]
    write_embeddings(tmp_path / "e8.csv", ids, rng.normal(size=(3, 8)))
    write_embeddings(tmp_path / "e4.csv", ids, rng.normal(size=(3, 4)))
    return read_embeddings(tmp_path / "e8.csv"), read_embeddings(tmp_path / "e4.csv")


def test_no_tables_is_identity(rng):
    fv = _vectors(rng, ["a"])[0]
    out = fuse(fv, "a")
    assert out.shape == (57,) and out.tobytes() == fv.values.tobytes()
    assert fused_width(57) == 57


def test_widths_add(tables, rng):
    e8, e4 = tables
    assert fused_width(57, [e8, e4]) == 69
    assert fused_matrix(_vectors(rng, ["a", "b", "c"]), [e8, e4]).shape == (3, 69)
    assert fused_matrix([], [e8, e4]).shape == (0, 69)


def test_declaration_order_permutes_blocks(tables, rng):
    e8, e4 = tables
    fv = _vectors(rng, ["b"])[0]
    ab = fuse(fv, "b", [e8, e4])
    ba = fuse(fv, "b", [e4, e8])
    assert np.array_equal(ab[:57], ba[:57])
    assert np.array_equal(ab[57:65], ba[61:69])
    assert np.array_equal(ab[65:69], ba[57:61])
    assert np.array_equal(ab[57:65], e8.vectors["b"])


def test_missing_embedding(tables, rng):
    with pytest.raises(MissingEmbedding) as err:
        fuse(_vectors(rng, ["zz"])[0], "zz", list(tables))
    assert "zz" in str(err.value) and "e8.csv" in str(err.value)


def test_width_mismatch_in_file(tmp_path):
    (tmp_path / "bad.csv").write_text("#dim=3\na,1,2,3\nb,1,2\n")
    with pytest.raises(WidthMismatch):
        read_embeddings(tmp_path / "bad.csv")


def test_header_parsing(tmp_path):
    (tmp_path / "e.csv").write_text("#dim=2\ntile_id,v1,v2\n# comment\nx,0.5,-1e-3\n")
    t = read_embeddings(tmp_path / "e.csv")
    assert t.dim == 2 and t.vectors["x"].tolist() == [0.5, -1e-3]
    (tmp_path / "nohdr.csv").write_text("x,1,2\n")
    with pytest.raises(ConfigError):
        read_embeddings(tmp_path / "nohdr.csv")
    (tmp_path / "dup.csv").write_text("#dim=1\nx,1\nx,2\n")
    with pytest.raises(ConfigError):
        read_embeddings(tmp_path / "dup.csv")


def test_embedding_round_trip_exact(tmp_path, rng):
    m = rng.normal(size=(4, 5)) * 1e-7
    write_embeddings(tmp_path / "r.csv", list("wxyz"), m)
    t = read_embeddings(tmp_path / "r.csv")
    assert np.vstack([t.vectors[k] for k in "wxyz"]).tobytes() == m.tobytes()
