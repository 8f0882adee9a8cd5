"""``cribra`` command line.

Exit codes: 0 success, 1 configuration/contract error, 2 partial data failure.
Every output file is written to a temporary sibling and renamed into place.
``CRIBRA_THREADS`` caps the worker count used for per-tile stages.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .augmentation import AugmentationGrid, RejectionPolicy, sample_augmented
from .classifiers import (MlpConfig, SvmConfig, fused_matrix, load_model, predict_mlp, read_embeddings,
                          save_model, train_mlp, train_svm)
from .classifiers.fusion import fused_width
from .classifiers.mlp import MlpModel
from .classifiers.svm import SvmModel
from .errors import ConfigError, CribraError, DegenerateImage, DimensionMismatch
from .evaluation import (ROLES, ConstantRecipe, MlpRecipe, SvmRecipe, build_fold_plan, parse_sets_config,
                         report_from_csv, run_cv)
from .image_io import Tile, load_tile, save_tile, to_gray
from .local_features import OBJECT_DUMP_COLUMNS, object_measurements
from .manifest import (FORMAT_LINE, Label, ManifestRow, atomic_write, format_real, iter_csv, read_manifest,
                       write_manifest, write_text_atomic)
from .segmentation import (DEFAULT_SEG, SegConfig, SegmentationResult, debug_label_png, image_occupied_area,
                           segment_nuclei)
from .spatial_features import N_FEATURES, feature_header_text, feature_row_text, read_features, tile_features
from .synthgen import patient_ids, write_dataset

log = logging.getLogger("cribra")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def n_threads() -> int:
    raw = os.environ.get("CRIBRA_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"CRIBRA_THREADS must be an integer, got {raw!r}") from None


def _map(fn, items):
    """Order-preserving map, threaded when CRIBRA_THREADS > 1."""
    workers = n_threads()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(FORMAT_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _seg_config(args, side: int) -> SegConfig:
    cfg = DEFAULT_SEG.scaled(side)
    if args.min_area is not None:
        cfg = SegConfig(args.min_area, cfg.max_area, side, cfg.dark_foreground)
    if args.max_area is not None:
        cfg = SegConfig(cfg.min_area, args.max_area, side, cfg.dark_foreground)
    return cfg


def _segment(tile, cfg):
    try:
        return segment_nuclei(to_gray(tile), cfg, source_id=tile.id)
    except DegenerateImage:
        # a flat tile has no foreground
        return SegmentationResult([], float("nan"), (tile.height, tile.width), tile.id)


def _object_rows(tile_id, seg):
    out = []
    for obj in seg.objects:
        m = object_measurements(obj)
        # full precision: the dump is the substrate for recomputing features
        out.append([tile_id] + [m["id"]] + [repr(float(m[c])) for c in OBJECT_DUMP_COLUMNS[1:]])
    return out


# --- synth -------------------------------------------------------------------


def cmd_synth(args) -> int:
    rows = write_dataset(args.out, patient_ids(args.patients, args.prefix), args.tiles_per_class, args.side,
                         args.seed, args.noise, masks=not args.no_masks)
    print(f"wrote {len(rows)} tiles to {args.out}")
    return EXIT_OK


# --- augment -----------------------------------------------------------------


def _parse_thetas(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"--thetas expects comma-separated degrees, got {text!r}") from None


def cmd_augment(args) -> int:
    try:
        grid = AugmentationGrid(args.delta, args.kmax, _parse_thetas(args.thetas), args.side)
        policy = RejectionPolicy(args.max_blank, args.blank_luminance, args.allow_out_of_bounds)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    context = load_tile(args.context)
    out = Path(args.out)
    tiles_dir = out / "tiles"
    tiles_dir.mkdir(parents=True, exist_ok=True)
    manifest, rejections = [], []
    for rec in iter_csv(args.origins):
        try:
            src = rec["source_id"]
            origin = (float(rec["x_c"]), float(rec["y_c"]))
            label = Label.parse(rec.get("label") or "unlabeled")
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{args.origins}: bad origin row {rec} ({exc})") from None
        ctx = Tile(context.pixels, id=src, patient_id=rec.get("patient_id", ""), label=label, source_id=src)
        res = sample_augmented(ctx, grid, origin, policy, source_id=src)
        for t in res.accepted:
            path = tiles_dir / f"{t.id}.png"
            save_tile(t, path)
            manifest.append(ManifestRow(str(path), t.id, t.patient_id, t.label, src,
                                        t.transform.dx, t.transform.dy, t.transform.theta))
        rejections += [[r.source_id, r.dx, r.dy, f"{r.theta:g}", r.reason] for r in res.rejected]
    write_manifest(out / "manifest.csv", manifest)
    write_text_atomic(out / "rejections.csv",
                      _csv_text(["source_id", "dx", "dy", "theta", "reason"], rejections))
    print(f"accepted {len(manifest)}, rejected {len(rejections)}")
    return EXIT_OK


# --- segment -------------------------------------------------------------------


def cmd_segment(args) -> int:
    rows = read_manifest(args.manifest)
    if args.labels_dir:
        Path(args.labels_dir).mkdir(parents=True, exist_ok=True)

    def work(row):
        try:
            tile = load_tile(row.tile_path, row)
            seg = _segment(tile, _seg_config(args, tile.width))
        except CribraError as exc:
            return row, None, exc
        return row, seg, None

    summary, objects, errors = [], [], []
    for row, seg, exc in _map(work, rows):
        if exc is not None:
            errors.append([row.tile_id, row.tile_path, type(exc).__name__, str(exc)])
            continue
        summary.append([row.tile_id, len(seg.objects), format_real(seg.threshold_used),
                        format_real(image_occupied_area(seg))])
        objects += _object_rows(row.tile_id, seg)
        if args.labels_dir:
            from PIL import Image

            with atomic_write(Path(args.labels_dir) / f"{row.tile_id}.png", "wb") as fh:
                Image.fromarray(debug_label_png(seg)).save(fh, format="PNG")
    write_text_atomic(args.out, _csv_text(["tile_id", "n_objects", "threshold", "occupied_area"], summary))
    if args.objects:
        write_text_atomic(args.objects, _csv_text(["tile_id", *OBJECT_DUMP_COLUMNS], objects))
    return _finish_errors(errors, args.errors or f"{args.out}.errors.csv")


def _finish_errors(errors, path) -> int:
    if errors:
        write_text_atomic(path, _csv_text(["tile_id", "tile_path", "error", "message"], errors))
        for e in errors:
            log.error("%s: %s: %s", e[0], e[2], e[3])
        return EXIT_PARTIAL
    return EXIT_OK


# --- features ------------------------------------------------------------------


def _existing_feature_lines(path: Path) -> tuple[list[str], set[str]]:
    if not path.exists():
        return [], set()
    done = set()
    with open(path, encoding="utf-8", newline="") as fh:
        body = [line for line in fh if not line.startswith("#")]
    if not body:
        return [], set()
    if body[0].rstrip("\r\n") != feature_header_text().splitlines()[1]:
        raise ConfigError(f"{path}: existing file has a different header; refusing to resume")
    for rec in csv.reader(body[1:]):
        if rec:
            done.add(rec[0])
    lines = body[1:]
    return lines, done


def cmd_features(args) -> int:
    rows = read_manifest(args.manifest)
    out = Path(args.out)
    old_lines, done = _existing_feature_lines(out)
    todo = [r for r in rows if r.tile_id not in done]

    def work(row):
        try:
            tile = load_tile(row.tile_path, row)
            fv, seg = tile_features(tile, _seg_config(args, tile.width), args.disorder, return_seg=True)
        except CribraError as exc:
            return row, None, None, exc
        return row, fv, seg, None

    new_lines, objects, errors = [], [], []
    for row, fv, seg, exc in _map(work, todo):
        if exc is not None:
            errors.append([row.tile_id, row.tile_path, type(exc).__name__, str(exc)])
            continue
        new_lines.append(feature_row_text(fv))
        objects += _object_rows(row.tile_id, seg)

    if new_lines or not out.exists():
        write_text_atomic(out, feature_header_text() + "".join(old_lines) + "".join(new_lines))
    if args.dump_objects and (objects or not Path(args.dump_objects).exists()):
        dump = Path(args.dump_objects)
        prev = list(iter_csv(dump)) if dump.exists() else []
        prev_rows = [[r[c] for c in ("tile_id", *OBJECT_DUMP_COLUMNS)] for r in prev]
        write_text_atomic(dump, _csv_text(["tile_id", *OBJECT_DUMP_COLUMNS], prev_rows + objects))
    log.info("features: %d computed, %d skipped, %d failed", len(new_lines), len(done), len(errors))
    return _finish_errors(errors, args.errors or f"{args.out}.errors.csv")


# --- training / prediction ------------------------------------------------------


def _labelled(features, only_valid: bool):
    return [f for f in features if f.label is not Label.UNLABELED and (f.valid or not only_valid)]


def _tables(paths):
    return [read_embeddings(p) for p in paths or []]


def _training_metadata(args, tables) -> dict:
    return {
        "features": os.path.basename(args.features),
        "embeddings": [t.name for t in tables],
        "embedding_dims": [t.dim for t in tables],
        "fused_width": fused_width(N_FEATURES, tables),
    }


def cmd_train_svm(args) -> int:
    feats = _labelled(read_features(args.features), args.only_valid)
    tables = _tables(args.embeddings)
    X = fused_matrix(feats, tables)
    y = np.array([f.label.sign for f in feats])
    cfg = SvmConfig(C=args.C, gamma=args.gamma, tol=args.tol, max_passes=args.max_passes, seed=args.seed)
    model = train_svm(X, y, cfg)
    save_model(model, args.out, _training_metadata(args, tables))
    acc = float(np.mean(model.predict(X) == y))
    print(f"trained SVM on {len(y)} tiles: {model.info['n_support']} support vectors, train accuracy {acc:.4f}")
    return EXIT_OK


def cmd_train_mlp(args) -> int:
    feats = _labelled(read_features(args.features), args.only_valid)
    tables = _tables(args.embeddings)
    X = fused_matrix(feats, tables)
    y = np.array([f.label.sign for f in feats])
    Xv = yv = None
    if args.val_features:
        val = _labelled(read_features(args.val_features), args.only_valid)
        Xv = fused_matrix(val, tables)
        yv = np.array([f.label.sign for f in val])
    cfg = MlpConfig(epochs=args.epochs, lr=args.lr, momentum=args.momentum, batch=args.batch, seed=args.seed)
    model = train_mlp(X, y, cfg, Xv, yv)
    save_model(model, args.out, _training_metadata(args, tables))
    final = model.loss_history[-1] if model.loss_history else float("nan")
    print(f"trained MLP on {len(y)} tiles, final loss {final:.6g}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    feats = read_features(args.features)
    X = fused_matrix(feats, _tables(args.embeddings))
    out_rows = []
    if isinstance(model, SvmModel):
        if X.shape[1] != model.support_vectors.shape[1]:
            raise DimensionMismatch(f"feature width {X.shape[1]} does not match model width "
                                    f"{model.support_vectors.shape[1]}")
        scores = model.decision_function(X)
        labels = np.where(scores >= 0, 1, -1)
        header = ["tile_id", "label", "score"]
        for f, lab, s in zip(feats, labels, scores):
            out_rows.append([f.tile_id, _label_name(lab), repr(float(s))])
    else:
        assert isinstance(model, MlpModel)
        use = model.snapshot if (model.snapshot is not None and not args.final) else model
        header = ["tile_id", "label", "p_non_cribriform", "p_cribriform"]
        for f, row in zip(feats, X):
            p = predict_mlp(use, row)
            out_rows.append([f.tile_id, _label_name(1 if p["label"] == 1 else -1),
                             repr(p["probabilities"][0]), repr(p["probabilities"][1])])
    write_text_atomic(args.out, _csv_text(header, out_rows))
    known = [(f.label.sign, r[1]) for f, r in zip(feats, out_rows) if f.label is not Label.UNLABELED]
    if known:
        acc = np.mean([_label_name(s) == lab for s, lab in known])
        print(f"accuracy on {len(known)} labelled tiles: {acc:.4f}")
    return EXIT_OK


def _label_name(sign) -> str:
    return Label.CRIBRIFORM.value if sign > 0 else Label.NON_CRIBRIFORM.value


# --- evaluate / report ----------------------------------------------------------


def _recipe(args):
    if args.recipe == "svm":
        return SvmRecipe(SvmConfig(C=args.C, gamma=args.gamma, seed=args.seed))
    if args.recipe == "mlp":
        return MlpRecipe(MlpConfig(epochs=args.epochs, lr=args.lr, batch=args.batch, seed=args.seed))
    return ConstantRecipe()


def cmd_evaluate(args) -> int:
    feats = read_features(args.features)
    with open(args.sets, encoding="utf-8") as fh:
        sets = parse_sets_config(fh.read())
    plan = build_fold_plan(feats, sets)
    tables = _tables(args.embeddings)
    report = run_cv(feats, plan, _recipe(args), args.n_per_class, args.seed, tables,
                    args.unseen_per_class, args.only_valid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_text_atomic(out / "report.txt", report.to_table())
    write_text_atomic(out / "report.csv", report.to_csv())
    write_text_atomic(out / "report.jsonl", report.to_jsonl())
    by_id = {f.tile_id: f for f in feats}
    split_rows = []
    for fr in report.folds:
        for role in ROLES:
            for tid in fr.split.ids(role):
                f = by_id[tid]
                split_rows.append([fr.fold + 1, role, tid, f.patient_id, f.label.value])
    write_text_atomic(out / "splits.csv", _csv_text(["fold", "role", "tile_id", "patient_id", "label"], split_rows))
    sys.stdout.write(report.to_table())
    return EXIT_OK


def cmd_report(args) -> int:
    for path in args.reports:
        sys.stdout.write(report_from_csv(path).to_table())
    return EXIT_OK


# --- parser ----------------------------------------------------------------------


def _add_seg_flags(p):
    p.add_argument("--min-area", type=int, help="minimum nucleus area in tile pixels (default scales 40 px @1024)")
    p.add_argument("--max-area", type=int, help="maximum nucleus area in tile pixels (default scales 5000 px @1024)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cribra", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"cribra {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=fn)
        p.add_argument("--seed", type=int, default=0)
        return p

    p = command("synth", cmd_synth, "render a synthetic gland-tile dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--patients", type=int, default=3)
    p.add_argument("--prefix", default="SYN")
    p.add_argument("--tiles-per-class", type=int, default=10)
    p.add_argument("--side", type=int, default=256)
    p.add_argument("--noise", type=float, default=4.0)
    p.add_argument("--no-masks", action="store_true")

    p = command("augment", cmd_augment, "translation/rotation resampling around origins")
    p.add_argument("--context", required=True, help="large context image")
    p.add_argument("--origins", required=True, help="CSV: source_id,x_c,y_c,patient_id,label")
    p.add_argument("--out", required=True)
    p.add_argument("--delta", type=int, default=50)
    p.add_argument("--kmax", type=int, default=2)
    p.add_argument("--thetas", default="0,60,120")
    p.add_argument("--max-blank", type=float, default=0.90)
    p.add_argument("--blank-luminance", type=int, default=240)
    p.add_argument("--side", type=int, default=1024)
    p.add_argument("--allow-out-of-bounds", action="store_true", help="pad with white instead of rejecting")

    p = command("segment", cmd_segment, "segment nuclei and write per-tile summaries")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--objects", help="also write the per-object measurement CSV")
    p.add_argument("--labels-dir", help="write debug label PNGs here")
    p.add_argument("--errors", help="per-tile error log (default OUT.errors.csv)")
    _add_seg_flags(p)

    p = command("features", cmd_features, "compute the 57 nuclei features per tile (resumable)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-objects", help="per-object measurement CSV")
    p.add_argument("--errors", help="per-tile error log (default OUT.errors.csv)")
    p.add_argument("--disorder", choices=("snr", "cv"), default="snr")
    _add_seg_flags(p)

    for name, fn in (("train-svm", cmd_train_svm), ("train-mlp", cmd_train_mlp)):
        p = command(name, fn, f"train the {name[6:].upper()} classifier")
        p.add_argument("--features", required=True)
        p.add_argument("--embeddings", nargs="*", default=[], help="embedding files, in fusion order")
        p.add_argument("--out", required=True)
        p.add_argument("--only-valid", action="store_true", help="drop tiles flagged degenerate")
        if name == "train-svm":
            p.add_argument("--C", type=float, default=100.0)
            p.add_argument("--gamma", type=float, default=0.1)
            p.add_argument("--tol", type=float, default=1e-3)
            p.add_argument("--max-passes", type=int, default=50)
        else:
            p.add_argument("--val-features")
            p.add_argument("--epochs", type=int, default=10_000)
            p.add_argument("--lr", type=float, default=1e-3)
            p.add_argument("--momentum", type=float, default=0.9)
            p.add_argument("--batch", type=int, default=32)

    p = command("predict", cmd_predict, "apply a saved model to a feature CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--embeddings", nargs="*", default=[])
    p.add_argument("--out", required=True)
    p.add_argument("--final", action="store_true", help="MLP: use final-epoch weights, not the validation snapshot")

    p = command("evaluate", cmd_evaluate, "patient-exclusive three-fold cross-validation")
    p.add_argument("--features", required=True)
    p.add_argument("--sets", required=True, help="text file with lines 'set1: p1, p2' .. 'set3: ...'")
    p.add_argument("--recipe", choices=("svm", "mlp", "constant"), default="svm")
    p.add_argument("--embeddings", nargs="*", default=[])
    p.add_argument("--n-per-class", type=int, default=1500)
    p.add_argument("--unseen-per-class", type=int, default=0)
    p.add_argument("--only-valid", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--C", type=float, default=100.0)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=10_000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=32)

    p = command("report", cmd_report, "print the table for one or more report CSVs")
    p.add_argument("reports", nargs="+")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CribraError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
