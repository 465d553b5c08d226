"""Perturbation-based attributions: sliding-window occlusion and temporal
saliency rescaling (TSR) around any base explainer."""
from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import InvalidParameter
from ..nn.models import Model, readout
from .base import ExplainContext, as_batch, resolve_targets

BatchExplainer = Callable[[Model, np.ndarray, np.ndarray, ExplainContext], np.ndarray]


def occlusion(
    model: Model,
    x,
    target=None,
    window: tuple[int, int] = (1, 5),
    baseline=None,
    readout_mode: str = "probability",
) -> np.ndarray:
    """Mean drop in the target score over all stride-1 windows covering a cell.

    Each window of ``window = (features, steps)`` cells is replaced by the
    matching cells of ``baseline``; the drop ``f(x) - f(x_occluded)`` is
    credited to every cell the window covers.
    """
    batch, single = as_batch(x)
    targets = resolve_targets(model, batch, target)
    n_features, t_steps = batch.shape[1:]
    wf, wt = map(int, window)
    if not (1 <= wf <= n_features and 1 <= wt <= t_steps):
        raise InvalidParameter(f"window {window} does not fit input ({n_features}, {t_steps})")
    if baseline is None:
        raise InvalidParameter("occlusion needs a baseline series")
    base = np.asarray(baseline, dtype=np.float64)

    positions = [(f, t) for f in range(n_features - wf + 1) for t in range(t_steps - wt + 1)]
    coverage = np.zeros((n_features, t_steps))
    for f, t in positions:
        coverage[f:f + wf, t:t + wt] += 1

    out = np.zeros_like(batch)
    for b in range(len(batch)):
        xb = batch[b]
        ref = np.broadcast_to(base, xb.shape) if base.ndim == 2 else base[b]
        occluded = np.repeat(xb[None], len(positions), axis=0)
        for k, (f, t) in enumerate(positions):
            occluded[k, f:f + wf, t:t + wt] = ref[f:f + wf, t:t + wt]
        scores = readout(model, np.concatenate([xb[None], occluded]), targets[b], readout_mode)
        drops = scores[0] - scores[1:]
        acc = np.zeros((n_features, t_steps))
        for k, (f, t) in enumerate(positions):
            acc[f:f + wf, t:t + wt] += drops[k]
        out[b] = acc / coverage
    return out[0] if single else out


def tsr(
    base_explainer: BatchExplainer,
    model: Model,
    x,
    target=None,
    ctx: ExplainContext | None = None,
    alpha: float | None = None,
    baseline=None,
) -> np.ndarray:
    """Temporal saliency rescaling of ``base_explainer``.

    1. Time relevance ``dt[t]`` is the L1 change of the base attribution map
       when every feature at step ``t`` is replaced by the baseline.
    2. For steps with ``dt[t] > alpha`` (default: mean of ``dt``) the feature
       relevance ``df[i, t]`` is the L1 change when only cell ``(i, t)`` is
       replaced, normalised to sum to one over features.  Univariate input
       has nothing to split, so its share is 1.
    3. The result is ``dt[t] * df[i, t]``, zero on steps at or below
       ``alpha``.
    """
    ctx = ctx or ExplainContext()
    batch, single = as_batch(x)
    targets = resolve_targets(model, batch, target)
    n_features, t_steps = batch.shape[1:]
    ref = np.asarray(baseline if baseline is not None else ctx.reference((n_features, t_steps)))

    out = np.zeros_like(batch)
    for b in range(len(batch)):
        xb = batch[b]
        time_masked = np.repeat(xb[None], t_steps, axis=0)
        for t in range(t_steps):
            time_masked[t, :, t] = ref[:, t]
        maps = base_explainer(model, np.concatenate([xb[None], time_masked]),
                              np.full(t_steps + 1, targets[b]), ctx)
        original = maps[0]
        d_time = np.abs(maps[1:] - original).sum(axis=(1, 2))
        threshold = d_time.mean() if alpha is None else alpha
        active = np.flatnonzero(d_time > threshold)
        if active.size == 0:
            continue

        share = np.zeros((n_features, t_steps))
        if n_features == 1:
            share[0, active] = 1.0
        else:
            cells = [(i, t) for t in active for i in range(n_features)]
            cell_masked = np.repeat(xb[None], len(cells), axis=0)
            for k, (i, t) in enumerate(cells):
                cell_masked[k, i, t] = ref[i, t]
            cell_maps = base_explainer(model, cell_masked, np.full(len(cells), targets[b]), ctx)
            d_feat = np.abs(cell_maps - original).sum(axis=(1, 2)).reshape(len(active), n_features)
            totals = d_feat.sum(axis=1, keepdims=True)
            normed = np.where(totals > 0, d_feat / np.where(totals > 0, totals, 1.0), 1.0 / n_features)
            share[:, active] = normed.T
        out[b] = d_time[None, :] * share
    return out[0] if single else out
