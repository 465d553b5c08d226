"""Explanation quality metrics: robustness, faithfulness, complexity, reliability.

Reliability and complexity work on ``|a|``.  Metrics that are undefined for
an input (all-zero attribution, zero-variance correlation) raise a
:class:`~tsxbench.errors.DegenerateMetric` subclass whose ``reason`` the
harness stores on the record.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .errors import (
    DegenerateAttribution,
    DegenerateCorrelation,
    ExplainerFailure,
    InvalidParameter,
    InvalidShape,
    MaskInfeasible,
)
from .nn.models import Model, predict_proba, readout
from .processes import GenerationSpec, sample_reference
from .seeding import make_rng

Explainer = Callable[[Model, np.ndarray, int], np.ndarray]

BASELINE_SOURCES = ("GenerationProcess", "Uniform", "TrainMean")


@dataclass
class RobustnessParams:
    radius: float = 0.1
    n_perturbations: int = 10
    seed: int = 0
    norm: str = "L2"

    def __post_init__(self):
        if self.radius < 0:
            raise InvalidParameter("radius must be >= 0")
        if self.n_perturbations < 1:
            raise InvalidParameter("n_perturbations must be >= 1")
        if self.norm not in ("L2", "Linf"):
            raise InvalidParameter(f"norm must be L2 or Linf, got {self.norm!r}")


@dataclass
class FaithfulnessParams:
    baseline_source: str = "GenerationProcess"
    subset_fraction: float = 0.1
    n_runs: int = 20
    seed: int = 0
    readout: str = "probability"

    def __post_init__(self):
        if self.baseline_source not in BASELINE_SOURCES:
            raise InvalidParameter(f"baseline_source must be one of {BASELINE_SOURCES}")
        if not 0 < self.subset_fraction < 1:
            raise InvalidParameter("subset_fraction must lie in (0, 1)")
        if self.n_runs < 2:
            raise InvalidParameter("a correlation needs n_runs >= 2")

    def subset_size(self, n_cells: int) -> int:
        return max(1, int(round(self.subset_fraction * n_cells)))


def to_dict(params) -> dict:
    return asdict(params)


# ---------------------------------------------------------------- robustness

def _norm(a: np.ndarray, kind: str) -> float:
    flat = np.ravel(a)
    return float(np.max(np.abs(flat))) if kind == "Linf" else float(np.sqrt(np.dot(flat, flat)))


def perturbations(x: np.ndarray, params: RobustnessParams) -> np.ndarray:
    """``n_perturbations`` offsets with norm at most ``radius``.

    Each offset is uniform noise on [-1, 1] rescaled to unit norm, then to a
    radius drawn uniformly from [0, r].
    """
    x = np.asarray(x, dtype=np.float64)
    rng = make_rng(params.seed, "sensitivity")
    out = np.zeros((params.n_perturbations, *x.shape))
    for k in range(params.n_perturbations):
        u = rng.uniform(-1.0, 1.0, size=x.shape)
        scale = rng.uniform(0.0, 1.0)
        size = _norm(u, params.norm)
        if size > 0 and params.radius > 0:
            out[k] = u * (params.radius * scale / size)
    return out


@dataclass
class SensitivityResult:
    distances: np.ndarray
    stable_fraction: float

    @property
    def max(self) -> float:
        return float(self.distances.max())

    @property
    def mean(self) -> float:
        return float(self.distances.mean())

    @property
    def stable(self) -> bool:
        return self.stable_fraction >= 0.5


def sensitivity(explainer: Explainer, model: Model, x, params: RobustnessParams | None = None,
                target: int | None = None) -> SensitivityResult:
    """Explanation distances ``||E(x + d) - E(x)||`` over the sampled offsets ``d``.

    The explained class is held at the prediction for ``x``.  The result also
    records how often the prediction survives the perturbation.
    """
    params = params or RobustnessParams()
    x = np.asarray(x, dtype=np.float64)
    probs = predict_proba(model, x)
    cls = int(np.argmax(probs))
    target = cls if target is None else int(target)
    reference = np.asarray(explainer(model, x, target), dtype=np.float64)

    deltas = perturbations(x, params)
    distances = np.zeros(len(deltas))
    perturbed = x[None] + deltas
    same = np.argmax(predict_proba(model, perturbed), axis=1) == cls
    for k, xp in enumerate(perturbed):
        try:
            e = np.asarray(explainer(model, xp, target), dtype=np.float64)
        except Exception as exc:
            raise ExplainerFailure(f"explainer failed on perturbation sample {k}: {exc}") from exc
        distances[k] = _norm(e - reference, params.norm)
    return SensitivityResult(distances, float(np.mean(same)))


def sens_max(explainer, model, x, params=None) -> float:
    return sensitivity(explainer, model, x, params).max


def sens_mean(explainer, model, x, params=None) -> float:
    return sensitivity(explainer, model, x, params).mean


# -------------------------------------------------------------- faithfulness

def draw_baseline(
    source: str,
    shape,
    rng: np.random.Generator,
    *,
    generation_spec: GenerationSpec | None = None,
    normalization=None,
    train_mean=None,
    feature_range=None,
) -> np.ndarray:
    """Reference series ``x~`` for one faithfulness evaluation."""
    shape = tuple(shape)
    if source == "GenerationProcess":
        if generation_spec is None or normalization is None:
            raise InvalidParameter("the generation-process baseline needs the dataset's spec and normalisation")
        seed = int(rng.integers(0, 2**63 - 1))
        return normalization.apply(sample_reference(generation_spec, shape, seed))
    if source == "Uniform":
        if feature_range is None:
            return rng.uniform(0.0, 1.0, size=shape)
        lo, hi = (np.broadcast_to(np.asarray(v, dtype=np.float64).reshape(-1, 1), shape) for v in feature_range)
        return lo + (hi - lo) * rng.uniform(0.0, 1.0, size=shape)
    if source == "TrainMean":
        if train_mean is None:
            raise InvalidParameter("the train-mean baseline needs the training mean")
        return np.broadcast_to(np.asarray(train_mean, dtype=np.float64), shape).copy()
    raise InvalidParameter(f"unknown baseline source {source!r}")


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DegenerateCorrelation("zero variance in attribution sums or output drops")
    a = a - a.mean()
    b = b - b.mean()
    return float(np.clip(np.dot(a, b) / np.sqrt(np.dot(a, a) * np.dot(b, b)), -1.0, 1.0))


def faithfulness_terms(model: Model, attribution, x, params: FaithfulnessParams | None = None,
                       baseline=None, **baseline_kwargs) -> tuple[np.ndarray, np.ndarray]:
    """The paired series whose correlation is the faithfulness score.

    Returns ``(attribution_sums, output_drops)`` over ``n_runs`` random cell
    subsets of size ``subset_fraction * N * T``.
    """
    params = params or FaithfulnessParams()
    x = np.asarray(x, dtype=np.float64)
    attr = np.asarray(getattr(attribution, "scores", attribution), dtype=np.float64)
    if attr.shape != x.shape:
        raise InvalidShape(f"attribution {attr.shape} does not match input {x.shape}")
    rng = make_rng(params.seed, "faithfulness")
    if baseline is None:
        baseline = draw_baseline(params.baseline_source, x.shape, rng, **baseline_kwargs)
    baseline = np.broadcast_to(np.asarray(baseline, dtype=np.float64), x.shape)

    cls = int(np.argmax(predict_proba(model, x)))
    n_cells = x.size
    k = params.subset_size(n_cells)
    sums = np.zeros(params.n_runs)
    perturbed = np.repeat(x[None], params.n_runs, axis=0)
    flat_attr, flat_base = attr.ravel(), baseline.ravel()
    for r in range(params.n_runs):
        subset = rng.choice(n_cells, size=k, replace=False)
        sums[r] = flat_attr[subset].sum()
        view = perturbed[r].reshape(-1)
        view[subset] = flat_base[subset]
    scores = readout(model, np.concatenate([x[None], perturbed]), cls, params.readout)
    return sums, scores[0] - scores[1:]


def faithfulness_corr(model: Model, attribution, x, params: FaithfulnessParams | None = None,
                      baseline=None, **baseline_kwargs) -> float:
    """Pearson correlation between subset attribution sums and output drops."""
    sums, drops = faithfulness_terms(model, attribution, x, params, baseline, **baseline_kwargs)
    return pearson(sums, drops)


# ---------------------------------------------------------------- complexity

def _magnitudes(attribution) -> np.ndarray:
    return np.abs(np.asarray(getattr(attribution, "scores", attribution), dtype=np.float64)).ravel()


def complexity(attribution) -> float:
    """Entropy of the fractional contribution ``|a_i| / sum |a|`` (0 ln 0 = 0)."""
    mag = _magnitudes(attribution)
    total = mag.sum()
    if not total > 0:
        raise DegenerateAttribution("complexity of an all-zero attribution is undefined")
    p = mag[mag > 0] / total
    return float(max(0.0, -np.sum(p * np.log(p))))


# --------------------------------------------------------------- reliability

def _mask(mask, shape) -> np.ndarray:
    m = np.asarray(mask, dtype=bool)
    if m.shape != tuple(shape):
        raise InvalidShape(f"mask {m.shape} does not match attribution {tuple(shape)}")
    if not m.any():
        raise MaskInfeasible("reliability needs a nonempty ground-truth mask")
    return m.ravel()


def relevance_rank_acc(attribution, mask) -> float:
    """Share of the ground truth found among the top-K cells by ``|a|``, K = |GT|.

    Ties are broken by cell order (feature-major).
    """
    scores = np.asarray(getattr(attribution, "scores", attribution), dtype=np.float64)
    gt = _mask(mask, scores.shape)
    k = int(gt.sum())
    top = np.argsort(-np.abs(scores.ravel()), kind="stable")[:k]
    return float(gt[top].sum() / k)


def relevance_mass_acc(attribution, mask) -> float:
    """Share of total ``|a|`` mass that falls inside the ground truth."""
    scores = np.asarray(getattr(attribution, "scores", attribution), dtype=np.float64)
    gt = _mask(mask, scores.shape)
    mag = np.abs(scores.ravel())
    total = mag.sum()
    if not total > 0:
        raise DegenerateAttribution("relevance mass of an all-zero attribution is undefined")
    return float(min(1.0, mag[gt].sum() / total))


METRICS = ("complexity", "racc", "macc", "faithfulness", "sens_max", "sens_mean")
ALIASES = {
    "relevance_rank": "racc", "relevance_rank_accuracy": "racc",
    "relevance_mass": "macc", "relevance_mass_accuracy": "macc",
    "faithfulness_corr": "faithfulness", "faith": "faithfulness",
    "max_sensitivity": "sens_max", "avg_sensitivity": "sens_mean", "mean_sensitivity": "sens_mean",
    "robustness": "sens_max", "reliability": "racc",
}
FAMILY = {
    "complexity": "complexity", "racc": "reliability", "macc": "reliability",
    "faithfulness": "faithfulness", "sens_max": "robustness", "sens_mean": "robustness",
}


def resolve_metric(name: str) -> str:
    key = name.strip().lower()
    key = ALIASES.get(key, key)
    if key not in METRICS:
        raise KeyError(f"unknown metric {name!r}; available: {', '.join(METRICS)}")
    return key
