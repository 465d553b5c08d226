"""Shared types for explainers: attributions and the per-call context."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import InvalidShape
from ..nn.models import Model, predict
from ..seeding import make_rng


@dataclass
class Attribution:
    scores: np.ndarray
    target_class: int
    explainer: str

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 2:
            raise InvalidShape(f"attribution must be (N, T), got {self.scores.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape

    def __eq__(self, other):
        if not isinstance(other, Attribution):
            return NotImplemented
        return (self.explainer == other.explainer and self.target_class == other.target_class
                and np.array_equal(self.scores, other.scores))


@dataclass
class ExplainContext:
    """Randomness and reference data for one explanation.

    ``baseline`` is the fixed reference series used for masking and as the
    integration start point.  ``background`` draws fresh reference series
    (for Gradient SHAP and the segment surrogate).  When either is missing,
    uniform noise on [0, 1] takes its place.
    """

    seed: int = 0
    baseline: np.ndarray | None = None
    background: Callable[[np.random.Generator], np.ndarray] | None = None

    def rng(self, *parts) -> np.random.Generator:
        return make_rng(self.seed, *parts)

    def reference(self, shape) -> np.ndarray:
        if self.baseline is not None:
            ref = np.asarray(self.baseline, dtype=np.float64)
            if ref.shape != tuple(shape):
                raise InvalidShape(f"baseline shape {ref.shape} does not match input {tuple(shape)}")
            return ref
        return self.rng("uniform-baseline").uniform(0.0, 1.0, size=shape)

    def draw_background(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.background is not None:
            return np.asarray(self.background(rng), dtype=np.float64)
        return rng.uniform(0.0, 1.0, size=shape)


def as_batch(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None], True
    if x.ndim != 3:
        raise InvalidShape(f"expected (N, T) or (B, N, T) input, got {x.shape}")
    return x, False


def resolve_targets(model: Model, batch: np.ndarray, target) -> np.ndarray:
    if target is None:
        return np.atleast_1d(predict(model, batch))
    return np.broadcast_to(np.asarray(target, dtype=np.int64), (len(batch),)).copy()
