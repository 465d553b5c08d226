"""Model checkpoints: ``model.json`` manifest plus a little-endian float64 blob.

The blob is the concatenation of every parameter tensor, raveled in C order,
in the order listed under ``parameters`` in the manifest.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .models import Model, build_model

CHECKPOINT_VERSION = "1.0"


def save_model(model: Model, path, extra: dict | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "architecture": model.architecture,
        "n_features": model.n_features,
        "t_steps": model.t_steps,
        "n_classes": model.n_classes,
        "seed": model.seed,
        "config": model.config(),
        "dtype": "<f8",
        "parameters": [{"name": k, "shape": list(p.shape)} for k, p in model.params.items()],
    }
    if extra:
        manifest["extra"] = extra
    model.get_flat().astype("<f8").tofile(path / "params.bin")
    with open(path / "model.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_manifest(path) -> dict:
    with open(Path(path) / "model.json") as fh:
        return json.load(fh)


def load_model(path) -> Model:
    path = Path(path)
    try:
        manifest = read_manifest(path)
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable model.json ({exc})") from exc
    try:
        model = build_model(manifest["architecture"], manifest["n_features"], manifest["t_steps"],
                            seed=manifest.get("seed", 0), **manifest.get("config", {}))
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"{path}/model.json: {exc}") from exc
    declared = [(p["name"], tuple(p["shape"])) for p in manifest["parameters"]]
    actual = [(k, tuple(p.shape)) for k, p in model.params.items()]
    if declared != actual:
        raise FormatError(f"{path}: parameter layout does not match {model.architecture}")
    flat = np.fromfile(path / "params.bin", dtype="<f8")
    expected = sum(int(np.prod(s)) for _, s in declared)
    if flat.size != expected:
        raise FormatError(f"{path}/params.bin: expected {expected} values, found {flat.size}")
    model.set_flat(flat.astype(np.float64))
    return model
