"""Versioned JSON model files.

Floats are written with ``repr`` precision, so save -> load -> predict is
bit-identical. Keys are sorted for byte-stable output.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict

import numpy as np

from ..errors import ModelFormatError
from ..manifest import write_text_atomic
from .mlp import MlpConfig, MlpModel
from .standardize import Standardizer
from .svm import SvmConfig, SvmModel

MODEL_FORMAT_VERSION = 1


def _matrix(a) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _unmatrix(d) -> np.ndarray:
    return np.asarray(d["data"], dtype=np.float64).reshape(d["shape"])


def _mlp_params(m: MlpModel) -> dict:
    return {
        "layer_dims": m.layer_dims,
        "weights": [_matrix(w) for w in m.weights],
        "biases": [_matrix(b) for b in m.biases],
    }


def model_to_dict(model, metadata: dict | None = None) -> dict:
    meta = dict(metadata or {})
    if isinstance(model, SvmModel):
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "svm",
            "standardizer": model.standardizer.to_dict(),
            "params": {
                "support_vectors": _matrix(model.support_vectors),
                "alphas": _matrix(model.alphas),
                "bias": model.bias,
                "gamma": model.gamma,
                "C": model.c,
            },
            "training_config": asdict(model.config),
            "seed": model.config.seed,
            "metadata": meta,
        }
    if isinstance(model, MlpModel):
        cfg = asdict(model.config)
        cfg["hidden"] = list(cfg["hidden"])
        d = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "mlp",
            "standardizer": model.standardizer.to_dict(),
            "params": _mlp_params(model),
            "training_config": cfg,
            "seed": model.config.seed,
            "metadata": meta,
        }
        if model.snapshot is not None:
            d["snapshot"] = {"params": _mlp_params(model.snapshot), "info": model.snapshot.info}
        return d
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_from_dict(d: dict):
    if d.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format_version {d.get('format_version')!r}")
    std = Standardizer.from_dict(d["standardizer"])
    p = d["params"]
    if d["kind"] == "svm":
        cfg = SvmConfig(**d["training_config"])
        return SvmModel(_unmatrix(p["support_vectors"]), _unmatrix(p["alphas"]), float(p["bias"]),
                        float(p["gamma"]), float(p["C"]), std, cfg, {"metadata": d.get("metadata", {})})
    if d["kind"] == "mlp":
        cfg_d = dict(d["training_config"])
        cfg_d["hidden"] = tuple(cfg_d["hidden"])
        cfg = MlpConfig(**cfg_d)
        model = MlpModel([_unmatrix(w) for w in p["weights"]], [_unmatrix(b) for b in p["biases"]], std, cfg,
                         info={"metadata": d.get("metadata", {})})
        if model.layer_dims != p["layer_dims"]:
            raise ModelFormatError("layer_dims disagree with stored weights")
        if "snapshot" in d:
            sp = d["snapshot"]["params"]
            model.snapshot = MlpModel([_unmatrix(w) for w in sp["weights"]], [_unmatrix(b) for b in sp["biases"]],
                                      std, cfg, info=d["snapshot"].get("info", {}))
        return model
    raise ModelFormatError(f"unknown model kind {d['kind']!r}")


def save_model(model, path: str | os.PathLike, metadata: dict | None = None) -> None:
    text = json.dumps(model_to_dict(model, metadata), sort_keys=True, separators=(",", ":"))
    write_text_atomic(path, text + "\n")


def load_model(path: str | os.PathLike):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a model file ({exc})") from None
    return model_from_dict(d)
