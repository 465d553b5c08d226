"""Reference explainers behind one batch interface.

Every entry in :data:`EXPLAINERS` is called as ``fn(model, X, targets, ctx)``
with ``X`` of shape ``(B, N, T)`` and returns attributions of the same shape.
"""
from __future__ import annotations

from functools import partial

import numpy as np

from .base import Attribution, ExplainContext, as_batch, resolve_targets
from .conversion import (
    example_to_attribution,
    load_explanation,
    load_external_attribution,
    save_attribution,
)
from .gradients import gradient_attribution, gradient_shap
from .perturbation import occlusion, tsr
from .surrogate import fit_surrogate, lime_surrogate, segment_layout


def _saliency(model, X, targets, ctx):
    return gradient_attribution(model, X, targets, "plain")


def _gradient_x_input(model, X, targets, ctx):
    return gradient_attribution(model, X, targets, "times_input")


def _smoothgrad(model, X, targets, ctx, n_samples=10, sigma=0.1):
    return gradient_attribution(model, X, targets, "smooth", n_samples=n_samples, sigma=sigma,
                                rng=ctx.rng("smoothgrad"))


def _integrated(model, X, targets, ctx, steps=32):
    return gradient_attribution(model, X, targets, "integrated", steps=steps,
                                baseline=ctx.reference(X.shape[1:]))


def _gradient_shap(model, X, targets, ctx, n_samples=20):
    return gradient_shap(model, X, targets, ctx, n_samples=n_samples)


def _occlusion(model, X, targets, ctx, window=(1, 5)):
    return occlusion(model, X, targets, window=window, baseline=ctx.reference(X.shape[1:]))


def _leftist(model, X, targets, ctx, segment_len=10, n_samples=None):
    return lime_surrogate(model, X, targets, ctx, segment_len=segment_len, n_samples=n_samples)


def _tsr(base, model, X, targets, ctx):
    return tsr(base, model, X, targets, ctx)


EXPLAINERS = {
    "saliency": _saliency,
    "gradient_x_input": _gradient_x_input,
    "smoothgrad": _smoothgrad,
    "integrated_gradients": _integrated,
    "gradient_shap": _gradient_shap,
    "occlusion": _occlusion,
    "leftist": _leftist,
}
for _name in ("saliency", "smoothgrad", "integrated_gradients", "gradient_shap", "occlusion"):
    EXPLAINERS[f"tsr_{_name}"] = partial(_tsr, EXPLAINERS[_name])

ALIASES = {"grad": "saliency", "sg": "smoothgrad", "gs": "gradient_shap", "ig": "integrated_gradients",
           "fo": "occlusion", "lime": "leftist"}


def resolve_name(name: str) -> str:
    key = name.strip().lower()
    key = ALIASES.get(key, key)
    if key.startswith("tsr_"):
        key = "tsr_" + ALIASES.get(key[4:], key[4:])
    if key not in EXPLAINERS:
        raise KeyError(f"unknown explainer {name!r}; available: {', '.join(sorted(EXPLAINERS))}")
    return key


def explain_batch(name: str, model, X, targets=None, ctx: ExplainContext | None = None) -> np.ndarray:
    ctx = ctx or ExplainContext()
    batch, single = as_batch(X)
    targets = resolve_targets(model, batch, targets)
    out = EXPLAINERS[resolve_name(name)](model, batch, targets, ctx)
    return out[0] if single else out


def explain(name: str, model, x, target=None, ctx: ExplainContext | None = None) -> Attribution:
    """Explain one (N, T) instance; ``target`` defaults to the predicted class."""
    batch, _ = as_batch(x)
    targets = resolve_targets(model, batch, target)
    scores = explain_batch(name, model, batch, targets, ctx)[0]
    return Attribution(scores, int(targets[0]), resolve_name(name))


__all__ = [
    "Attribution", "EXPLAINERS", "ExplainContext", "example_to_attribution", "explain",
    "explain_batch", "fit_surrogate", "gradient_attribution", "gradient_shap", "lime_surrogate",
    "load_explanation", "load_external_attribution", "occlusion", "resolve_name", "save_attribution",
    "segment_layout", "tsr",
]
