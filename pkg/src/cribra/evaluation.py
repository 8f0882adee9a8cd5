"""Patient-exclusive three-fold cross-validation.

Three disjoint patient sets rotate through the train / validation / test
roles:

    fold 1: set1=Train       set2=Validation  set3=Test
    fold 2: set1=Validation  set2=Test        set3=Train
    fold 3: set1=Test        set2=Train       set3=Validation

Each role is sampled class-balanced. An optional "unseen" test split draws
further tiles from the same test patients that were never sampled.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .classifiers.fusion import EmbeddingTable, fused_matrix
from .classifiers.mlp import MlpConfig, train_mlp
from .classifiers.svm import SvmConfig, train_svm
from .errors import ConfigError, InsufficientTiles, PatientOverlap, UnassignedPatient
from .manifest import FORMAT_LINE, Label

TRAIN, VALIDATION, TEST = "Train", "Validation", "Test"
ROLES = (TRAIN, VALIDATION, TEST)
ROLE_TABLE = (
    (TRAIN, VALIDATION, TEST),
    (VALIDATION, TEST, TRAIN),
    (TEST, TRAIN, VALIDATION),
)
CLASSES = (Label.CRIBRIFORM, Label.NON_CRIBRIFORM)


@dataclass(frozen=True)
class FoldPlan:
    sets: tuple[tuple[str, ...], ...]
    role_table: tuple[tuple[str, ...], ...] = ROLE_TABLE

    @property
    def n_folds(self) -> int:
        return len(self.role_table)

    def patients(self, fold: int, role: str) -> frozenset[str]:
        """Patients playing ``role`` in ``fold`` (folds are 0-based)."""
        idx = self.role_table[fold].index(role)
        return frozenset(self.sets[idx])


def parse_sets_config(text: str) -> list[list[str]]:
    """Parse ``setN: id, id, ...`` lines (``#`` comments allowed)."""
    sets: dict[int, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"set\s*(\d+)\s*[:=]\s*(.*)", line, flags=re.IGNORECASE)
        if not m:
            raise ConfigError(f"sets config line {lineno}: expected 'setN: id, id, ...', got {raw!r}")
        k = int(m.group(1))
        if k in sets:
            raise ConfigError(f"sets config line {lineno}: set{k} defined twice")
        sets[k] = [p for p in (s.strip() for s in m.group(2).split(",")) if p]
    if sorted(sets) != [1, 2, 3]:
        raise ConfigError(f"sets config must define exactly set1, set2 and set3, found {sorted(sets)}")
    return [sets[k] for k in (1, 2, 3)]


def format_sets_config(sets: Sequence[Sequence[str]]) -> str:
    return "".join(f"set{i}: {', '.join(s)}\n" for i, s in enumerate(sets, start=1))


def build_fold_plan(manifest, sets_config: Sequence[Sequence[str]]) -> FoldPlan:
    """Validate patient sets against the manifest's patients."""
    if len(sets_config) != 3:
        raise UnassignedPatient([f"<expected 3 patient sets, got {len(sets_config)}>"])
    seen: dict[str, int] = {}
    overlap = set()
    for k, s in enumerate(sets_config):
        for pid in s:
            if pid in seen and seen[pid] != k:
                overlap.add(pid)
            seen.setdefault(pid, k)
    if overlap:
        raise PatientOverlap(overlap)
    patients = {getattr(r, "patient_id", r) for r in manifest}
    missing = patients - set(seen)
    if missing:
        raise UnassignedPatient(missing)
    return FoldPlan(tuple(tuple(dict.fromkeys(s)) for s in sets_config))


@dataclass(frozen=True)
class SampledSplit:
    fold: int
    train: tuple[str, ...] = ()
    validation: tuple[str, ...] = ()
    test: tuple[str, ...] = ()
    counts: dict = field(default_factory=dict)

    def ids(self, role: str) -> tuple[str, ...]:
        return {TRAIN: self.train, VALIDATION: self.validation, TEST: self.test}[role]

    @property
    def all_ids(self) -> set[str]:
        return set(self.train) | set(self.validation) | set(self.test)


def _draw(candidates: list[str], n: int, seed_key: list[int], role: str, label: Label) -> list[str]:
    if len(candidates) < n:
        raise InsufficientTiles(role, label.value, len(candidates), n)
    rng = np.random.default_rng(np.random.SeedSequence(seed_key))
    pick = rng.choice(len(candidates), size=n, replace=False)
    return sorted(candidates[i] for i in pick)


def _pool(manifest, patients, label, exclude=frozenset()) -> list[str]:
    return sorted(r.tile_id for r in manifest
                  if r.patient_id in patients and r.label is label and r.tile_id not in exclude)


def sample_balanced(manifest, plan: FoldPlan, fold: int, n_per_class: int, seed: int = 0) -> SampledSplit:
    """Seeded class-balanced sampling without replacement for every role."""
    out: dict[str, list[str]] = {}
    counts = {}
    for r_idx, role in enumerate(ROLES):
        patients = plan.patients(fold, role)
        ids: list[str] = []
        for label in CLASSES:
            picked = _draw(_pool(manifest, patients, label), n_per_class,
                           [seed, fold, r_idx, label.class_index], role, label)
            ids += picked
            counts[(role, label.value)] = len(picked)
        out[role] = sorted(ids)
    return SampledSplit(fold, tuple(out[TRAIN]), tuple(out[VALIDATION]), tuple(out[TEST]), counts)


def build_unseen_test(manifest, plan: FoldPlan, fold: int, used_ids, n_per_class: int, seed: int = 0) -> SampledSplit:
    """Balanced test-only split from the fold's test patients, excluding ``used_ids``."""
    used = frozenset(used_ids)
    patients = plan.patients(fold, TEST)
    ids: list[str] = []
    counts = {}
    for label in CLASSES:
        picked = _draw(_pool(manifest, patients, label, used), n_per_class,
                       [seed, fold, 99, label.class_index], "Unseen test", label)
        ids += picked
        counts[("Unseen", label.value)] = len(picked)
    return SampledSplit(fold, test=tuple(sorted(ids)), counts=counts)


# --- recipes ------------------------------------------------------------------


class Recipe(Protocol):
    name: str

    def fit(self, X, y, X_val, y_val): ...


@dataclass
class SvmRecipe:
    config: SvmConfig = SvmConfig()
    name: str = "svm"

    def fit(self, X, y, X_val=None, y_val=None):
        return train_svm(X, y, self.config)


class _MlpPredictor:
    def __init__(self, model):
        self.model = model
        self.chosen = model.snapshot if model.snapshot is not None else model

    def predict(self, X):
        return np.where(self.chosen.predict(X) == 1, 1, -1)


@dataclass
class MlpRecipe:
    config: MlpConfig = MlpConfig()
    name: str = "mlp"

    def fit(self, X, y, X_val=None, y_val=None):
        return _MlpPredictor(train_mlp(X, y, self.config, X_val, y_val))


class _Constant:
    def __init__(self, label):
        self.label = label

    def predict(self, X):
        return np.full(len(X), self.label)


@dataclass
class ConstantRecipe:
    """Always predicts one label; a balance sanity check."""

    label: int = 1
    name: str = "constant"

    def fit(self, X, y, X_val=None, y_val=None):
        return _Constant(self.label)


# --- reporting ----------------------------------------------------------------


def confusion(y_true, y_pred) -> dict[str, int]:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    return {
        "tp": int(np.sum((y_true > 0) & (y_pred > 0))),
        "fn": int(np.sum((y_true > 0) & (y_pred <= 0))),
        "fp": int(np.sum((y_true <= 0) & (y_pred > 0))),
        "tn": int(np.sum((y_true <= 0) & (y_pred <= 0))),
    }


def accuracy_of(cm: dict[str, int]) -> float:
    total = cm["tp"] + cm["tn"] + cm["fp"] + cm["fn"]
    return (cm["tp"] + cm["tn"]) / total if total else float("nan")


def summarize(values: Sequence[float]) -> dict[str, float]:
    """Mean, sample std (n-1) and standard error (std / sqrt(n))."""
    v = sorted(float(x) for x in values)
    n = len(v)
    mean = math.fsum(v) / n
    std = math.sqrt(math.fsum((x - mean) ** 2 for x in v) / (n - 1)) if n > 1 else 0.0
    return {"mean": mean, "std": std, "se": std / math.sqrt(n)}


@dataclass
class FoldResult:
    fold: int
    test_accuracy: float
    val_accuracy: float
    confusion: dict[str, int]
    unseen_accuracy: float | None = None
    unseen_confusion: dict[str, int] | None = None
    split: SampledSplit | None = None


@dataclass
class FoldReport:
    recipe: str
    folds: list[FoldResult]

    def summary(self, key: str = "test_accuracy") -> dict[str, float]:
        return summarize([getattr(f, key) for f in self.folds])

    @property
    def mean(self) -> float:
        return self.summary()["mean"]

    @property
    def std(self) -> float:
        return self.summary()["std"]

    @property
    def se(self) -> float:
        return self.summary()["se"]

    def to_table(self) -> str:
        lines = [f"Recipe: {self.recipe}",
                 f"{'fold':>4}  {'val acc':>8}  {'test acc':>8}  {'unseen':>8}   TP   FN   FP   TN"]
        for f in self.folds:
            unseen = f"{100 * f.unseen_accuracy:8.2f}" if f.unseen_accuracy is not None else f"{'-':>8}"
            cm = f.confusion
            lines.append(f"{f.fold + 1:>4}  {100 * f.val_accuracy:8.2f}  {100 * f.test_accuracy:8.2f}  {unseen} "
                         f"{cm['tp']:4d} {cm['fn']:4d} {cm['fp']:4d} {cm['tn']:4d}")
        for key, title in (("val_accuracy", "validation"), ("test_accuracy", "test")):
            s = self.summary(key)
            lines.append(f"{title}: {100 * s['mean']:.2f} +- {100 * s['std']:.2f} (std), "
                         f"+- {100 * s['se']:.2f} (standard error)")
        if all(f.unseen_accuracy is not None for f in self.folds) and self.folds:
            s = self.summary("unseen_accuracy")
            lines.append(f"unseen test: {100 * s['mean']:.2f} +- {100 * s['std']:.2f} (std), "
                         f"+- {100 * s['se']:.2f} (standard error)")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(FORMAT_LINE + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["recipe", "fold", "val_accuracy", "test_accuracy", "unseen_accuracy", "tp", "fn", "fp", "tn"])
        for f in self.folds:
            w.writerow([self.recipe, f.fold + 1, repr(f.val_accuracy), repr(f.test_accuracy),
                        "" if f.unseen_accuracy is None else repr(f.unseen_accuracy),
                        f.confusion["tp"], f.confusion["fn"], f.confusion["fp"], f.confusion["tn"]])
        s = self.summary()
        w.writerow([self.recipe, "mean", "", repr(s["mean"]), "", "", "", "", ""])
        w.writerow([self.recipe, "std", "", repr(s["std"]), "", "", "", "", ""])
        w.writerow([self.recipe, "se", "", repr(s["se"]), "", "", "", "", ""])
        return buf.getvalue()

    def to_jsonl(self) -> str:
        lines = []
        for f in self.folds:
            lines.append(json.dumps({"recipe": self.recipe, "fold": f.fold + 1, "val_accuracy": f.val_accuracy,
                                     "test_accuracy": f.test_accuracy, "unseen_accuracy": f.unseen_accuracy,
                                     "confusion": f.confusion}, sort_keys=True))
        lines.append(json.dumps({"recipe": self.recipe, "summary": self.summary()}, sort_keys=True))
        return "\n".join(lines) + "\n"


def report_from_csv(path) -> FoldReport:
    from .manifest import iter_csv

    folds = []
    recipe = ""
    for rec in iter_csv(path):
        recipe = rec["recipe"]
        if not rec["fold"].isdigit():
            continue
        cm = {k: int(rec[k]) for k in ("tp", "fn", "fp", "tn")}
        folds.append(FoldResult(int(rec["fold"]) - 1, float(rec["test_accuracy"]), float(rec["val_accuracy"]), cm,
                                float(rec["unseen_accuracy"]) if rec["unseen_accuracy"] else None))
    return FoldReport(recipe, folds)


def _signs(rows) -> np.ndarray:
    return np.array([r.label.sign for r in rows])


def run_cv(samples, plan: FoldPlan, recipe, n_per_class: int, seed: int = 0,
           tables: Sequence[EmbeddingTable] = (), unseen_per_class: int | None = None,
           only_valid: bool = False) -> FoldReport:
    """Fit on Train, score Validation and Test for each fold of ``plan``.

    ``samples`` are feature vectors carrying tile_id / patient_id / label.
    With ``only_valid`` tiles flagged degenerate are excluded before sampling.
    """
    pool = [s for s in samples if s.label in CLASSES and (s.valid or not only_valid)]
    by_id = {s.tile_id: s for s in pool}
    results = []
    for fold in range(plan.n_folds):
        try:
            split = sample_balanced(pool, plan, fold, n_per_class, seed)
            parts = {}
            for role in ROLES:
                rows = [by_id[i] for i in split.ids(role)]
                parts[role] = (fused_matrix(rows, list(tables)), _signs(rows))
            Xtr, ytr = parts[TRAIN]
            Xv, yv = parts[VALIDATION]
            Xte, yte = parts[TEST]
            model = recipe.fit(Xtr, ytr, Xv, yv)
            val_cm = confusion(yv, model.predict(Xv))
            test_cm = confusion(yte, model.predict(Xte))
            res = FoldResult(fold, accuracy_of(test_cm), accuracy_of(val_cm), test_cm, split=split)
            if unseen_per_class:
                unseen = build_unseen_test(pool, plan, fold, split.all_ids, unseen_per_class, seed)
                rows = [by_id[i] for i in unseen.test]
                ucm = confusion(_signs(rows), model.predict(fused_matrix(rows, list(tables))))
                res.unseen_accuracy = accuracy_of(ucm)
                res.unseen_confusion = ucm
        except Exception as exc:
            exc.args = (f"fold {fold + 1}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            raise
        results.append(res)
    return FoldReport(getattr(recipe, "name", type(recipe).__name__), results)
