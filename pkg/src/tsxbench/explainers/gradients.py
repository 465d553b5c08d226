"""Gradient-based attributions: saliency, gradient x input, SmoothGrad,
integrated gradients and Gradient SHAP.

Random draws (noise copies, SHAP baselines) are made once per call and shared
by every row of a batch, so an instance gets the same attribution whether it
is explained alone or inside a batch.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidParameter
from ..nn.models import Model, input_gradient
from .base import ExplainContext, as_batch, resolve_targets

VARIANTS = ("plain", "times_input", "smooth", "integrated")


def _repeat_grad(model, points: np.ndarray, targets: np.ndarray, reps: int) -> np.ndarray:
    """Gradients at ``points`` of shape (B, reps, N, T), each row with its own target."""
    b = points.shape[0]
    flat = points.reshape(b * reps, *points.shape[2:])
    grads = input_gradient(model, flat, np.repeat(targets, reps))
    return grads.reshape(points.shape)


def gradient_attribution(
    model: Model,
    x,
    target=None,
    variant: str = "plain",
    *,
    n_samples: int = 10,
    sigma: float = 0.1,
    steps: int = 32,
    baseline=None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Attribution from input gradients of the target-class logit.

    ``plain``       absolute gradient.
    ``times_input`` gradient times input.
    ``smooth``      mean absolute gradient over ``n_samples`` copies with
                    N(0, sigma^2) noise.
    ``integrated``  (x - baseline) times the mean gradient over ``steps``
                    evenly spaced points on the straight path from the
                    baseline to x (both ends included).
    """
    batch, single = as_batch(x)
    targets = resolve_targets(model, batch, target)
    if variant not in VARIANTS:
        raise InvalidParameter(f"unknown gradient variant {variant!r}")

    if variant == "plain" or (variant == "smooth" and sigma == 0):
        if variant == "smooth" and n_samples < 1:
            raise InvalidParameter("n_samples must be >= 1")
        out = np.abs(input_gradient(model, batch, targets))
    elif variant == "times_input":
        out = input_gradient(model, batch, targets) * batch
    elif variant == "smooth":
        if sigma < 0 or n_samples < 1:
            raise InvalidParameter("SmoothGrad needs sigma >= 0 and n_samples >= 1")
        rng = rng if rng is not None else np.random.default_rng(0)
        noise = rng.normal(0.0, sigma, size=(n_samples, *batch.shape[1:]))
        grads = _repeat_grad(model, batch[:, None] + noise[None], targets, n_samples)
        out = np.abs(grads).mean(axis=1)
    else:
        if steps < 2:
            raise InvalidParameter("integrated gradients needs steps >= 2")
        if baseline is None:
            raise InvalidParameter("integrated gradients needs a baseline series")
        base = np.broadcast_to(np.asarray(baseline, dtype=np.float64), batch.shape)
        alphas = np.linspace(0.0, 1.0, steps)[None, :, None, None]
        path = base[:, None] + alphas * (batch - base)[:, None]
        out = (batch - base) * _repeat_grad(model, path, targets, steps).mean(axis=1)
    return out[0] if single else out


def gradient_shap(
    model: Model,
    x,
    target=None,
    ctx: ExplainContext | None = None,
    n_samples: int = 20,
    noise_sigma: float = 0.0,
) -> np.ndarray:
    """Expected-gradients estimate of SHAP values.

    For each of ``n_samples`` draws a reference series ``b`` is taken from
    the context background and a point ``b + u (x - b)`` with ``u ~ U(0, 1)``
    is formed; the attribution averages ``grad * (x - b)`` over the draws.
    """
    ctx = ctx or ExplainContext()
    batch, single = as_batch(x)
    targets = resolve_targets(model, batch, target)
    if n_samples < 1:
        raise InvalidParameter("n_samples must be >= 1")
    rng = ctx.rng("gradient_shap")
    shape = batch.shape[1:]
    refs = np.stack([ctx.draw_background(rng, shape) for _ in range(n_samples)])
    alphas = rng.uniform(0.0, 1.0, size=n_samples)[:, None, None]
    noise = rng.normal(0.0, noise_sigma, size=(n_samples, *shape)) if noise_sigma > 0 else 0.0
    points = refs[None] + alphas[None] * (batch[:, None] - refs[None]) + noise
    grads = _repeat_grad(model, points, targets, n_samples)
    out = (grads * (batch[:, None] - refs[None])).mean(axis=1)
    return out[0] if single else out
