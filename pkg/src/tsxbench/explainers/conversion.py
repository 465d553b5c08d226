"""Example-to-attribution conversion and the attribution exchange format.

Exchange format: ``attr.json`` holding ``explainer``, ``target_class``,
``n_features``, ``t_steps`` and ``scores`` (row-major, feature-major), or a
CSV of N rows x T columns with a sidecar ``<stem>.json`` manifest carrying
the same fields minus ``scores``.  An optional ``kind`` field set to
``"example"`` marks a counterexample series that still has to be converted,
and an optional ``instance`` field names the test instance it explains.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..errors import FormatError, InvalidShape
from .base import Attribution

EPS_GUARD = 1e-6


def example_to_attribution(x, example, feature_range=None, eps: float = EPS_GUARD,
                           explainer: str = "example", target_class: int = -1) -> Attribution:
    """Fraction of change ``|x - x'| / max(|x|, eps)`` per cell.

    ``feature_range`` is a ``(min, max)`` pair, or per-feature arrays of
    them, that rescales raw data into [0, 1] before the ratio is formed.
    Synthetic data is already normalised and can omit it.
    """
    x = np.asarray(x, dtype=np.float64)
    example = np.asarray(example, dtype=np.float64)
    if x.shape != example.shape or x.ndim != 2:
        raise InvalidShape(f"example shape {example.shape} does not match instance {x.shape}")
    if feature_range is not None:
        lo, hi = (np.asarray(v, dtype=np.float64) for v in feature_range)
        lo = lo.reshape(-1, 1) if lo.ndim else lo
        hi = hi.reshape(-1, 1) if hi.ndim else hi
        span = np.where(hi - lo == 0, 1.0, hi - lo)
        x, example = (x - lo) / span, (example - lo) / span
    delta = np.abs(x - example) / np.maximum(np.abs(x), eps)
    return Attribution(delta, target_class, explainer)


def save_attribution(attr: Attribution, path, fmt: str = "json", **fields) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "explainer": attr.explainer,
        "target_class": int(attr.target_class),
        "n_features": int(attr.shape[0]),
        "t_steps": int(attr.shape[1]),
        **fields,
    }
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump({**meta, "scores": attr.scores.ravel().tolist()}, fh)
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in attr.scores:
                writer.writerow([repr(float(v)) for v in row])
        with open(path.with_suffix(".json"), "w") as fh:
            json.dump(meta, fh, indent=2)
    else:
        raise ValueError(f"unknown attribution format {fmt!r}")
    return path


def _check_finite(scores: np.ndarray, path: Path, t_steps: int) -> None:
    bad = np.flatnonzero(~np.isfinite(scores.ravel()))
    if bad.size:
        i, t = divmod(int(bad[0]), t_steps)
        raise FormatError(f"{path.name}: non-finite score at cell ({i}, {t})")


def read_attribution_file(path) -> tuple[np.ndarray, dict]:
    """Raw ``(scores, metadata)`` from a JSON file or a CSV plus sidecar."""
    path = Path(path)
    if path.suffix == ".csv":
        sidecar = path.with_suffix(".json")
        try:
            with open(sidecar) as fh:
                meta = json.load(fh)
        except FileNotFoundError as exc:
            raise FormatError(f"{path.name}: missing sidecar manifest {sidecar.name}") from exc
        with open(path, newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        widths = {len(r) for r in rows}
        if len(widths) > 1:
            raise FormatError(f"{path.name}: ragged rows")
        scores = np.asarray(rows, dtype=np.float64)
    else:
        with open(path) as fh:
            try:
                meta = json.load(fh, parse_constant=lambda c: {"NaN": math.nan,
                                                               "Infinity": math.inf,
                                                               "-Infinity": -math.inf}[c])
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path.name}: invalid JSON ({exc})") from exc
        if "scores" not in meta:
            raise FormatError(f"{path.name}: missing field 'scores'")
        raw = [math.nan if v is None else v for v in meta.pop("scores")]
        try:
            scores = np.asarray(raw, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{path.name}: scores must be numbers") from exc
    for key in ("n_features", "t_steps"):
        if key not in meta:
            raise FormatError(f"{path.name}: missing field {key!r}")
    n, t = int(meta["n_features"]), int(meta["t_steps"])
    if scores.size != n * t:
        raise InvalidShape(f"{path.name}: declares {n}x{t} but holds {scores.size} scores")
    return scores.reshape(n, t), meta


def load_external_attribution(path, expected_shape=None) -> Attribution:
    path = Path(path)
    scores, meta = read_attribution_file(path)
    if expected_shape is not None and scores.shape != tuple(expected_shape):
        raise InvalidShape(f"{path.name}: shape {scores.shape} does not match expected {tuple(expected_shape)}")
    _check_finite(scores, path, scores.shape[1])
    return Attribution(scores, int(meta.get("target_class", -1)), str(meta.get("explainer", path.stem)))


def load_explanation(path, x=None, expected_shape=None, feature_range=None) -> tuple[Attribution, dict]:
    """Load either an attribution or an example file, converting examples via Δx."""
    attr = load_external_attribution(path, expected_shape)
    _, meta = read_attribution_file(path)
    if meta.get("kind", "attribution") == "example":
        if x is None:
            raise FormatError(f"{Path(path).name}: example explanations need the explained instance")
        attr = example_to_attribution(x, attr.scores, feature_range,
                                      explainer=attr.explainer, target_class=attr.target_class)
    return attr, meta
