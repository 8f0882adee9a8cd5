import os

import numpy as np
import pytest

from cribra.classifiers.fusion import write_embeddings
from cribra.cli import main
from cribra.image_io import Tile, save_tile
from cribra.manifest import FORMAT_LINE, Label, ManifestRow, iter_csv, read_manifest, write_manifest
from cribra.spatial_features import read_features
from cribra.synthgen import SynthSpec, generate


def _rows(path):
    return list(iter_csv(path))


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(root), "--patients", "6", "--tiles-per-class", "5", "--seed", "3"]) == 0
    assert main(["features", "--manifest", str(root / "manifest.csv"), "--out", str(root / "features.csv")]) == 0
    (root / "sets.txt").write_text("set1: SYN-01, SYN-02\nset2: SYN-03, SYN-04\nset3: SYN-05, SYN-06\n")
    return root


def test_synth_layout(dataset):
    rows = read_manifest(dataset / "manifest.csv")
    assert len(rows) == 60
    assert all(os.path.exists(r.tile_path) for r in rows)
    assert len(os.listdir(dataset / "masks")) == 60
    assert (dataset / "manifest.csv").read_text().startswith(FORMAT_LINE + "\n")


def test_features_rows(dataset):
    feats = read_features(dataset / "features.csv")
    assert len(feats) == 60
    assert {f.label for f in feats} == {Label.CRIBRIFORM, Label.NON_CRIBRIFORM}
    assert all(f.valid for f in feats)


def test_empty_manifest(tmp_path):
    write_manifest(tmp_path / "m.csv", [])
    assert main(["features", "--manifest", str(tmp_path / "m.csv"), "--out", str(tmp_path / "f.csv")]) == 0
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[0] == FORMAT_LINE and lines[1].startswith("tile_id,patient_id,label,valid,")
    assert not (tmp_path / "f.csv.errors.csv").exists()


def test_unreadable_tile(tmp_path):
    write_manifest(tmp_path / "m.csv", [ManifestRow(str(tmp_path / "nope.png"), "t1", "P1", Label.CRIBRIFORM)])
    assert main(["features", "--manifest", str(tmp_path / "m.csv"), "--out", str(tmp_path / "f.csv")]) == 2
    assert _rows(tmp_path / "f.csv") == []
    errs = _rows(tmp_path / "f.csv.errors.csv")
    assert len(errs) == 1 and errs[0]["tile_id"] == "t1" and errs[0]["error"] == "UnreadableFile"


def test_resume_skips_done_tiles(tmp_path, dataset):
    rows = read_manifest(dataset / "manifest.csv")[:3]
    write_manifest(tmp_path / "m.csv", rows[:2])
    out = tmp_path / "f.csv"
    assert main(["features", "--manifest", str(tmp_path / "m.csv"), "--out", str(out)]) == 0
    stamp = os.stat(out).st_mtime_ns
    assert main(["features", "--manifest", str(tmp_path / "m.csv"), "--out", str(out)]) == 0
    assert os.stat(out).st_mtime_ns == stamp
    write_manifest(tmp_path / "m.csv", rows)
    assert main(["features", "--manifest", str(tmp_path / "m.csv"), "--out", str(out)]) == 0
    assert [r["tile_id"] for r in _rows(out)] == [r.tile_id for r in rows]


def test_segment_command(tmp_path, dataset):
    rows = read_manifest(dataset / "manifest.csv")[:2]
    write_manifest(tmp_path / "m.csv", rows)
    assert main(["segment", "--manifest", str(tmp_path / "m.csv"), "--out", str(tmp_path / "s.csv"),
                 "--objects", str(tmp_path / "o.csv"), "--labels-dir", str(tmp_path / "lab")]) == 0
    summary = _rows(tmp_path / "s.csv")
    objs = _rows(tmp_path / "o.csv")
    assert [s["tile_id"] for s in summary] == [r.tile_id for r in rows]
    assert sum(int(s["n_objects"]) for s in summary) == len(objs)
    assert len(os.listdir(tmp_path / "lab")) == 2


def _context_png(path):
    tile, _ = generate(SynthSpec(seed=5, label=Label.CRIBRIFORM))
    px = np.tile(tile.pixels, (2, 2, 1))
    px[:, 300:] = 255  # right-hand side blank
    save_tile(Tile(px), path)


@pytest.mark.parametrize("extra, per_origin", [([], 75), (["--kmax", "0", "--thetas", "0"], 1)])
def test_augment(tmp_path, extra, per_origin):
    _context_png(tmp_path / "ctx.png")
    (tmp_path / "origins.csv").write_text("source_id,x_c,y_c,patient_id,label\n"
                                          "s1,200,256,P1,cribriform\ns2,330,256,P1,cribriform\n")
    args = ["augment", "--context", str(tmp_path / "ctx.png"), "--origins", str(tmp_path / "origins.csv"),
            "--out", str(tmp_path / "aug"), "--side", "128", "--delta", "20", *extra]
    assert main(args) == 0
    manifest = read_manifest(tmp_path / "aug" / "manifest.csv")
    rejected = _rows(tmp_path / "aug" / "rejections.csv")
    files = os.listdir(tmp_path / "aug" / "tiles")
    assert len(files) == len(manifest)
    assert {os.path.basename(r.tile_path) for r in manifest} == set(files)
    for src in ("s1", "s2"):
        n_acc = sum(r.source_id == src for r in manifest)
        n_rej = sum(r["source_id"] == src for r in rejected)
        assert n_acc + n_rej == per_origin
    if per_origin == 75:
        assert {r["reason"] for r in rejected} == {"Blank"}
        assert all(r.dx is not None and r.theta is not None for r in manifest)
    else:
        assert [r.tile_id for r in manifest] == ["s1_dx+0_dy+0_r0", "s2_dx+0_dy+0_r0"]


def test_augment_bad_thetas(tmp_path):
    _context_png(tmp_path / "ctx.png")
    (tmp_path / "o.csv").write_text("source_id,x_c,y_c\ns1,256,256\n")
    base = ["augment", "--context", str(tmp_path / "ctx.png"), "--origins", str(tmp_path / "o.csv"),
            "--out", str(tmp_path / "a"), "--side", "64"]
    assert main(base + ["--thetas", "0,sixty"]) == 1
    assert main(base + ["--thetas", "400"]) == 1
    assert main(base + ["--delta", "0"]) == 1


def test_train_svm_and_predict(tmp_path, dataset):
    feats = str(dataset / "features.csv")
    assert main(["train-svm", "--features", feats, "--out", str(tmp_path / "m.json")]) == 0
    assert main(["predict", "--model", str(tmp_path / "m.json"), "--features", feats,
                 "--out", str(tmp_path / "p.csv")]) == 0
    truth = {f.tile_id: f.label.value for f in read_features(feats)}
    preds = _rows(tmp_path / "p.csv")
    assert len(preds) == 60
    assert all(truth[p["tile_id"]] == p["label"] for p in preds)


def test_train_mlp_and_predict(tmp_path, dataset):
    feats = str(dataset / "features.csv")
    assert main(["train-mlp", "--features", feats, "--val-features", feats, "--epochs", "60",
                 "--out", str(tmp_path / "m.json")]) == 0
    for extra in ([], ["--final"]):
        assert main(["predict", "--model", str(tmp_path / "m.json"), "--features", feats,
                     "--out", str(tmp_path / "p.csv"), *extra]) == 0
        for p in _rows(tmp_path / "p.csv"):
            assert float(p["p_cribriform"]) + float(p["p_non_cribriform"]) == pytest.approx(1.0, abs=1e-9)


def test_width_mismatch_exits_1(tmp_path, dataset, capsys):
    feats = str(dataset / "features.csv")
    ids = [f.tile_id for f in read_features(feats)]
    write_embeddings(tmp_path / "e.csv", ids, np.random.default_rng(0).normal(size=(len(ids), 8)))
    assert main(["train-svm", "--features", feats, "--embeddings", str(tmp_path / "e.csv"),
                 "--out", str(tmp_path / "m.json")]) == 0
    code = main(["predict", "--model", str(tmp_path / "m.json"), "--features", feats, "--out", str(tmp_path / "p.csv")])
    assert code == 1
    assert "DimensionMismatch" in capsys.readouterr().err
    assert not (tmp_path / "p.csv").exists()


def test_evaluate_overlap_exits_1(tmp_path, dataset, capsys):
    (tmp_path / "sets.txt").write_text("set1: SYN-01, SYN-02\nset2: SYN-03, SYN-02\nset3: SYN-04, SYN-05, SYN-06\n")
    code = main(["evaluate", "--features", str(dataset / "features.csv"), "--sets", str(tmp_path / "sets.txt"),
                 "--n-per-class", "4", "--out", str(tmp_path / "ev")])
    assert code == 1
    assert "SYN-02" in capsys.readouterr().err


def test_evaluate_outputs(tmp_path, dataset, capsys):
    assert main(["evaluate", "--features", str(dataset / "features.csv"), "--sets", str(dataset / "sets.txt"),
                 "--n-per-class", "4", "--unseen-per-class", "3", "--out", str(tmp_path / "ev")]) == 0
    ev = tmp_path / "ev"
    assert {"report.txt", "report.csv", "report.jsonl", "splits.csv"} <= set(os.listdir(ev))
    splits = _rows(ev / "splits.csv")
    assert len(splits) == 3 * 3 * 8
    for fold in "123":
        by_role = {}
        for s in splits:
            if s["fold"] == fold:
                by_role.setdefault(s["role"], set()).add(s["patient_id"])
        roles = list(by_role.values())
        assert all(not (a & b) for i, a in enumerate(roles) for b in roles[i + 1:])
    capsys.readouterr()
    assert main(["report", str(ev / "report.csv")]) == 0
    assert "standard error" in capsys.readouterr().out


def _run_all(root, dataset):
    man = root / "m.csv"
    rows = read_manifest(dataset / "manifest.csv")
    write_manifest(man, rows)
    assert main(["features", "--manifest", str(man), "--out", str(root / "f.csv")]) == 0
    assert main(["train-svm", "--features", str(root / "f.csv"), "--out", str(root / "svm.json"), "--seed", "4"]) == 0
    assert main(["train-mlp", "--features", str(root / "f.csv"), "--epochs", "5", "--out", str(root / "mlp.json"),
                 "--seed", "4"]) == 0
    assert main(["evaluate", "--features", str(root / "f.csv"), "--sets", str(dataset / "sets.txt"),
                 "--n-per-class", "4", "--seed", "4", "--out", str(root / "ev")]) == 0


def test_identical_invocations_identical_bytes(tmp_path, dataset, monkeypatch):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    _run_all(a, dataset)
    monkeypatch.setenv("CRIBRA_THREADS", "4")
    _run_all(b, dataset)
    for name in ("f.csv", "svm.json", "mlp.json", "ev/report.csv", "ev/report.txt", "ev/splits.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_bad_thread_env(tmp_path, monkeypatch):
    write_manifest(tmp_path / "m.csv", [])
    monkeypatch.setenv("CRIBRA_THREADS", "many")
    assert main(["features", "--manifest", str(tmp_path / "m.csv"), "--out", str(tmp_path / "f.csv")]) == 1
