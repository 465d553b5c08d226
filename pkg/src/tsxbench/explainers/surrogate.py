"""Segment-level local surrogate in the LEFTIST style (reference-set background)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import IllPosedSurrogate, InvalidParameter
from ..nn.models import Model, readout
from .base import ExplainContext, as_batch, resolve_targets


@dataclass
class SurrogateFit:
    coefficients: np.ndarray
    intercept: float
    segments: list[tuple[int, int, int]]
    samples: np.ndarray
    predictions: np.ndarray
    weights: np.ndarray

    def predict(self, z: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(z, dtype=np.float64) @ self.coefficients


def segment_layout(n_features: int, t_steps: int, segment_len: int) -> list[tuple[int, int, int]]:
    """``(feature, start, stop)`` per segment; the last segment of a row absorbs the remainder."""
    if segment_len < 1:
        raise InvalidParameter("segment_len must be >= 1")
    per_row = max(1, t_steps // segment_len)
    segments = []
    for i in range(n_features):
        for k in range(per_row):
            stop = t_steps if k == per_row - 1 else (k + 1) * segment_len
            segments.append((i, k * segment_len, stop))
    return segments


def fit_surrogate(
    model: Model,
    x: np.ndarray,
    target: int,
    ctx: ExplainContext | None = None,
    segment_len: int = 10,
    n_samples: int | None = None,
    readout_mode: str = "probability",
) -> SurrogateFit:
    """Weighted least-squares fit of target score on segment on/off indicators.

    Sample 0 keeps every segment on.  Off segments take their values from a
    background series drawn for that sample.  Weights follow an exponential
    kernel on the number of switched-off segments with width
    ``sqrt(n_segments)``.
    """
    ctx = ctx or ExplainContext()
    x = np.asarray(x, dtype=np.float64)
    segments = segment_layout(*x.shape, segment_len)
    n_seg = len(segments)
    if n_samples is None:
        n_samples = max(100, 2 * n_seg + 1)
    if n_samples < n_seg:
        raise IllPosedSurrogate(f"{n_samples} samples cannot fit {n_seg} segment coefficients")

    rng = ctx.rng("surrogate")
    z = rng.integers(0, 2, size=(n_samples, n_seg)).astype(np.float64)
    z[0] = 1.0
    perturbed = np.repeat(x[None], n_samples, axis=0)
    for j in range(1, n_samples):
        background = ctx.draw_background(rng, x.shape)
        for s in np.flatnonzero(z[j] == 0):
            i, lo, hi = segments[s]
            perturbed[j, i, lo:hi] = background[i, lo:hi]
    preds = readout(model, perturbed, target, readout_mode)

    distance = n_seg - z.sum(axis=1)
    weights = np.exp(-(distance ** 2) / n_seg)
    design = np.hstack([np.ones((n_samples, 1)), z])
    root = np.sqrt(weights)[:, None]
    coef, *_ = np.linalg.lstsq(design * root, preds * root[:, 0], rcond=None)
    return SurrogateFit(coef[1:], float(coef[0]), segments, z, preds, weights)


def lime_surrogate(
    model: Model,
    x,
    target=None,
    ctx: ExplainContext | None = None,
    segment_len: int = 10,
    n_samples: int | None = None,
    readout_mode: str = "probability",
) -> np.ndarray:
    """Per-cell attribution: each cell receives its segment's surrogate coefficient."""
    batch, single = as_batch(x)
    targets = resolve_targets(model, batch, target)
    out = np.zeros_like(batch)
    for b in range(len(batch)):
        fit = fit_surrogate(model, batch[b], int(targets[b]), ctx, segment_len, n_samples, readout_mode)
        for coef, (i, lo, hi) in zip(fit.coefficients, fit.segments):
            out[b, i, lo:hi] = coef
    return out[0] if single else out
