"""Benchmark orchestration: train, gate, explain, score and aggregate.

Work is split into (dataset, model, explainer) tasks.  Every random draw is
keyed by a seed derived from the master seed and the task's identifiers, and
records are sorted before they are returned, so the output does not depend
on the number of workers or the scheduling order.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Mapping

import numpy as np
from threadpoolctl import threadpool_limits

from . import metrics as M
from .catalog import CatalogConfig, SyntheticDataset, build_catalog, filter_catalog
from .errors import DegenerateMetric, EmptySelection, InvalidParameter, MissingCapability
from .explainers import ExplainContext, explain_batch, resolve_name
from .nn.models import Model, accuracy, build_model, predict
from .nn.training import TrainConfig, train
from .seeding import derive_seed

logger = logging.getLogger(__name__)

OK, DEGENERATE, SKIPPED = "ok", "degenerate", "skipped"
RECORD_FIELDS = ("dataset", "model", "explainer", "instance", "metric", "value", "status", "reason")
STATS_FIELDS = ("group", "mean", "median", "q1", "q3", "min", "max", "count", "degenerate_count")


@dataclass(frozen=True)
class MetricRecord:
    dataset: str
    model: str
    explainer: str
    instance: int
    metric: str
    value: float
    status: str = OK
    reason: str = ""

    @property
    def usable(self) -> bool:
        return self.status == OK and math.isfinite(self.value)

    def sort_key(self):
        order = M.METRICS.index(self.metric) if self.metric in M.METRICS else len(M.METRICS)
        return (self.dataset, self.model, self.explainer, self.instance, order, self.metric)

    def as_row(self) -> list[str]:
        value = "" if math.isnan(self.value) else repr(float(self.value))
        return [self.dataset, self.model, self.explainer, str(self.instance), self.metric,
                value, self.status, self.reason]


@dataclass
class BenchmarkPlan:
    types: list[str] = field(default_factory=list)
    models: list[str] = field(default_factory=lambda: ["TemporalConv"])
    explainers: list[str] = field(default_factory=lambda: ["saliency", "smoothgrad", "occlusion"])
    metrics: list[str] = field(default_factory=lambda: list(M.METRICS))
    seed: int = 0
    workers: int = 1
    max_instances: int | None = None
    accuracy_gate: float = 0.9
    robustness: M.RobustnessParams = field(default_factory=M.RobustnessParams)
    faithfulness: M.FaithfulnessParams = field(default_factory=M.FaithfulnessParams)
    training: TrainConfig = field(default_factory=TrainConfig)
    catalog: CatalogConfig = field(default_factory=CatalogConfig)

    def __post_init__(self):
        if not self.models or not self.explainers or not self.metrics:
            raise InvalidParameter("a plan needs at least one model, explainer and metric")
        self.explainers = [resolve_name(e) for e in self.explainers]
        self.metrics = [M.resolve_metric(m) for m in self.metrics]

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = asdict(value) if hasattr(value, "__dataclass_fields__") else value
        out["catalog"]["arities"] = list(self.catalog.arities)
        out["catalog"]["processes"] = list(self.catalog.processes)
        out["catalog"]["features"] = list(self.catalog.features)
        out["catalog"]["types"] = list(self.catalog.types)
        return out


@dataclass
class RunLog:
    accuracies: list[dict] = field(default_factory=list)
    gate_skips: list[dict] = field(default_factory=list)


# --------------------------------------------------------------------- seeds

def record_seed(master: int, dataset: str, model: str, explainer: str, instance: int, metric: str) -> int:
    return derive_seed(master, dataset, model, explainer, instance, metric)


def model_seed(master: int, dataset: str, architecture: str) -> int:
    return derive_seed(master, dataset, architecture, "model")


# ------------------------------------------------------------------ training

def _train_task(args):
    ds, architecture, master, cfg = args
    with threadpool_limits(1):
        seed = model_seed(master, ds.name, architecture)
        model = build_model(architecture, *ds.shape, seed=seed)
        cfg = TrainConfig(**{**asdict(cfg), "seed": seed})
        model, history = train(model, ds.x_train, ds.y_train, cfg)
        info = {
            "dataset": ds.name,
            "architecture": model.architecture,
            "train_acc": accuracy(model, ds.x_train, ds.y_train),
            "test_acc": accuracy(model, ds.x_test, ds.y_test),
            "epochs_run": len(history),
        }
    return model, info


def _pool_map(fn, tasks: list, workers: int) -> list:
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def train_pairs(pairs: list, master_seed: int, cfg: TrainConfig | None = None, workers: int = 1):
    """Train the given ``(dataset, architecture)`` pairs; returns ``{(name, arch): (model, info)}``."""
    cfg = cfg or TrainConfig()
    tasks = [(ds, arch, master_seed, cfg) for ds, arch in pairs]
    results = _pool_map(_train_task, tasks, workers)
    return {(ds.name, info["architecture"]): (model, info)
            for (ds, *_), (model, info) in zip(tasks, results)}


def train_models(catalog: list[SyntheticDataset], architectures: Iterable[str], master_seed: int,
                 cfg: TrainConfig | None = None, workers: int = 1):
    """Train one model per (dataset, architecture)."""
    return train_pairs([(ds, a) for ds in catalog for a in architectures], master_seed, cfg, workers)


# ----------------------------------------------------------------- contexts

def synthetic_context(ds: SyntheticDataset, seed: int, instance: int, explain_seed: int) -> ExplainContext:
    """Explainer context whose references come from the dataset's generating process."""
    if ds.generation_spec is None:
        return ExplainContext(seed=explain_seed)
    baseline = ds.reference_sample(derive_seed(seed, ds.name, instance, "explainer-baseline"))

    def background(rng, _ds=ds):
        return _ds.reference_sample(int(rng.integers(0, 2**63 - 1)))

    return ExplainContext(seed=explain_seed, baseline=baseline, background=background)


def _degenerate(rec_args, exc: DegenerateMetric) -> MetricRecord:
    return MetricRecord(*rec_args, value=math.nan, status=DEGENERATE, reason=exc.reason)


def score_instance(
    *,
    dataset: str,
    model_name: str,
    explainer_name: str,
    instance: int,
    x: np.ndarray,
    attribution: np.ndarray,
    metrics: list[str],
    master_seed: int,
    mask: np.ndarray | None = None,
    model: Model | None = None,
    live_explainer=None,
    robustness: M.RobustnessParams | None = None,
    faithfulness: M.FaithfulnessParams | None = None,
    baseline_kwargs: Mapping | None = None,
) -> list[MetricRecord]:
    """All requested metric records for one explained instance."""
    out = []
    sens = None
    for metric in metrics:
        key = (dataset, model_name, explainer_name, instance, metric)
        seed = record_seed(master_seed, *key)
        try:
            if metric == "complexity":
                value = M.complexity(attribution)
            elif metric in ("racc", "macc"):
                if mask is None:
                    out.append(MetricRecord(*key, value=math.nan, status=SKIPPED, reason="NoGroundTruth"))
                    continue
                fn = M.relevance_rank_acc if metric == "racc" else M.relevance_mass_acc
                value = fn(attribution, mask)
            elif metric == "faithfulness":
                if model is None:
                    raise MissingCapability("faithfulness needs a live model")
                params = M.FaithfulnessParams(**{**asdict(faithfulness or M.FaithfulnessParams()), "seed": seed})
                value = M.faithfulness_corr(model, attribution, x, params, **(baseline_kwargs or {}))
            elif metric in ("sens_max", "sens_mean"):
                if model is None or live_explainer is None:
                    raise MissingCapability("robustness needs a live model and explainer")
                if sens is None:
                    # both statistics share one sample set
                    rseed = record_seed(master_seed, dataset, model_name, explainer_name, instance, "robustness")
                    params = M.RobustnessParams(**{**asdict(robustness or M.RobustnessParams()), "seed": rseed})
                    sens = M.sensitivity(live_explainer, model, x, params)
                value = sens.max if metric == "sens_max" else sens.mean
                if not sens.stable:
                    out.append(MetricRecord(*key, value=value, reason="UnstablePrediction"))
                    continue
            else:  # pragma: no cover - guarded by resolve_metric
                raise KeyError(metric)
        except DegenerateMetric as exc:
            out.append(_degenerate(key, exc))
            continue
        out.append(MetricRecord(*key, value=float(value)))
    return out


def _explain_task(args) -> list[MetricRecord]:
    ds, model_name, model, explainer, indices, plan = args
    records = []
    with threadpool_limits(1):
        kwargs = {
            "generation_spec": ds.generation_spec,
            "normalization": ds.normalization,
            "train_mean": ds.train_mean(),
        }
        for idx in indices:
            x = ds.x_test[idx]
            mask = ds.mask_test[idx] if ds.has_masks else None
            ctx = synthetic_context(ds, plan.seed, idx,
                                    record_seed(plan.seed, ds.name, model_name, explainer, idx, "explain"))
            target = int(predict(model, x))
            attribution = explain_batch(explainer, model, x, target, ctx)

            def live(m, xx, t, _ctx=ctx, _name=explainer):
                return explain_batch(_name, m, xx, t, _ctx)

            records.extend(score_instance(
                dataset=ds.name, model_name=model_name, explainer_name=explainer, instance=int(idx),
                x=x, attribution=attribution, metrics=plan.metrics, master_seed=plan.seed, mask=mask,
                model=model, live_explainer=live, robustness=plan.robustness,
                faithfulness=plan.faithfulness, baseline_kwargs=kwargs,
            ))
    return records


def evaluate_synthetic(
    plan: BenchmarkPlan,
    catalog: list[SyntheticDataset] | None = None,
    models: Mapping | None = None,
    run_log: RunLog | None = None,
) -> list[MetricRecord]:
    """Score every gated (dataset, model, explainer, test instance, metric).

    ``catalog`` defaults to building the synthetic catalog from
    ``plan.catalog``; ``models`` maps ``(dataset, architecture)`` to a trained
    model (missing ones are trained here).  Models whose test accuracy is not
    above ``plan.accuracy_gate`` are skipped and noted in ``run_log``.
    """
    run_log = run_log if run_log is not None else RunLog()
    if catalog is None:
        catalog = build_catalog(plan.catalog, workers=plan.workers)
    catalog = filter_catalog(catalog, plan.types)
    if not catalog:
        raise EmptySelection(f"no dataset matches types {plan.types}")

    architectures = [build_model(a, 1, 2).architecture for a in plan.models]
    models = dict(models or {})
    missing = [(ds, a) for ds in catalog for a in architectures if (ds.name, a) not in models]
    if missing:
        for key, (model, _info) in train_pairs(missing, plan.seed, plan.training, plan.workers).items():
            models[key] = model

    gated = []
    for ds in catalog:
        for arch in architectures:
            model = models[(ds.name, arch)]
            acc = accuracy(model, ds.x_test, ds.y_test)
            run_log.accuracies.append({"dataset": ds.name, "model": arch, "test_acc": acc})
            if acc > plan.accuracy_gate:
                gated.append((ds, arch, model))
            else:
                logger.info("gate: skipping %s on %s (test accuracy %.3f <= %.2f)",
                            arch, ds.name, acc, plan.accuracy_gate)
                run_log.gate_skips.append({"dataset": ds.name, "model": arch, "test_acc": acc})
    if not gated:
        detail = ", ".join(f"{a['model']}@{a['dataset']}={a['test_acc']:.3f}" for a in run_log.accuracies)
        raise EmptySelection(f"no model passed the accuracy gate ({detail})")

    tasks = []
    for ds, arch, model in gated:
        n = len(ds.x_test) if plan.max_instances is None else min(plan.max_instances, len(ds.x_test))
        for explainer in plan.explainers:
            tasks.append((ds, arch, model, explainer, list(range(n)), plan))
    records = [r for chunk in _pool_map(_explain_task, tasks, plan.workers) for r in chunk]
    return sorted(records, key=MetricRecord.sort_key)


def _group_attributions(attributions, n_instances: int) -> dict[str, np.ndarray]:
    if isinstance(attributions, np.ndarray):
        return {"custom": attributions}
    if isinstance(attributions, Mapping):
        return {k: np.asarray(v) if not isinstance(v, list) else np.stack([a.scores for a in v])
                for k, v in attributions.items()}
    grouped: dict[str, list] = {}
    for a in attributions:
        grouped.setdefault(a.explainer, []).append(a.scores)
    return {k: np.stack(v) for k, v in grouped.items()}


def evaluate(
    x,
    *,
    model: Model | None = None,
    attributions=None,
    explainers: Iterable[str] = (),
    metrics: Iterable[str] = ("complexity",),
    masks=None,
    dataset: str = "custom",
    model_name: str | None = None,
    instances: Iterable[int] | None = None,
    seed: int = 0,
    baseline=None,
    feature_range=None,
    robustness: M.RobustnessParams | None = None,
    faithfulness: M.FaithfulnessParams | None = None,
) -> list[MetricRecord]:
    """Score explanations of arbitrary data.

    ``x`` is an ``(n, N, T)`` array or a loaded dataset (its test split is
    used).  Explanations come from ``attributions`` (an ``(n, N, T)`` array,
    a mapping from explainer name to such arrays, or a list of
    :class:`Attribution`) and/or from running ``explainers`` on ``model``.
    Reliability metrics need ``masks``; faithfulness and robustness need a
    live ``model``.  Faithfulness defaults to a uniform baseline.
    """
    ds_kwargs = {}
    if isinstance(x, SyntheticDataset):
        ds = x
        ds_kwargs = {"generation_spec": ds.generation_spec, "normalization": ds.normalization,
                     "train_mean": ds.train_mean()}
        dataset = ds.name if dataset == "custom" else dataset
        x, masks = ds.x_test, (ds.mask_test if masks is None and ds.has_masks else masks)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
        if masks is not None and np.ndim(masks) == 2:
            masks = np.asarray(masks)[None]
    metrics = [M.resolve_metric(m) for m in metrics]
    explainers = [resolve_name(e) for e in explainers]
    faithfulness = faithfulness or M.FaithfulnessParams(baseline_source="Uniform")

    needs_model = {"faithfulness", "sens_max", "sens_mean"} & set(metrics)
    if model is None and (needs_model or explainers):
        raise MissingCapability(f"{sorted(needs_model) or explainers} require a live model")
    if attributions is None and not explainers:
        raise InvalidParameter("nothing to score: pass attributions or explainers")
    if attributions is not None and {"sens_max", "sens_mean"} & set(metrics) and not explainers:
        raise MissingCapability("robustness needs a live explainer, not stored attributions")

    model_name = model_name or (model.architecture if model is not None else "none")
    indices = list(range(len(x))) if instances is None else list(instances)
    if baseline is None:
        baseline_kwargs = {"feature_range": feature_range, **ds_kwargs}
    else:
        baseline_kwargs = {"baseline": baseline}

    records = []
    if attributions is not None:
        for name, scores in _group_attributions(attributions, len(x)).items():
            if scores.shape[1:] != x.shape[1:] or len(scores) != len(indices):
                raise InvalidParameter(f"attributions for {name} do not match the data")
            stored_metrics = [m for m in metrics if m not in ("sens_max", "sens_mean")]
            for pos, idx in enumerate(indices):
                records.extend(score_instance(
                    dataset=dataset, model_name=model_name, explainer_name=name, instance=int(idx),
                    x=x[idx], attribution=scores[pos], metrics=stored_metrics, master_seed=seed,
                    mask=None if masks is None else masks[idx], model=model,
                    faithfulness=faithfulness, baseline_kwargs=baseline_kwargs,
                ))
    for name in explainers:
        for idx in indices:
            ctx = ExplainContext(seed=record_seed(seed, dataset, model_name, name, idx, "explain"),
                                 baseline=baseline)
            target = int(predict(model, x[idx]))
            attribution = explain_batch(name, model, x[idx], target, ctx)

            def live(m, xx, t, _ctx=ctx, _name=name):
                return explain_batch(_name, m, xx, t, _ctx)

            records.extend(score_instance(
                dataset=dataset, model_name=model_name, explainer_name=name, instance=int(idx),
                x=x[idx], attribution=attribution, metrics=metrics, master_seed=seed,
                mask=None if masks is None else masks[idx], model=model, live_explainer=live,
                robustness=robustness, faithfulness=faithfulness, baseline_kwargs=baseline_kwargs,
            ))
    return sorted(records, key=MetricRecord.sort_key)


# ---------------------------------------------------------------- aggregate

@dataclass
class AggregateStats:
    group: tuple
    mean: float
    median: float
    q1: float
    q3: float
    min: float
    max: float
    count: int
    degenerate_count: int = 0

    @property
    def label(self) -> str:
        return "/".join(str(v) for _, v in self.group)

    def key(self, name: str):
        return dict(self.group)[name]

    def as_dict(self) -> dict:
        return {"group": dict(self.group), "label": self.label, "mean": self.mean, "median": self.median,
                "q1": self.q1, "q3": self.q3, "min": self.min, "max": self.max, "count": self.count,
                "degenerate_count": self.degenerate_count}


def summarize(values) -> dict:
    v = np.sort(np.asarray(values, dtype=np.float64))
    q1, median, q3 = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    return {"mean": float(v.mean()), "median": float(median), "q1": float(q1), "q3": float(q3),
            "min": float(v[0]), "max": float(v[-1]), "count": int(len(v))}


def aggregate(records: Iterable[MetricRecord], group_by=("explainer", "metric"),
              pool: str = "instances") -> list[AggregateStats]:
    """Median, mean, quartiles and range of metric values per group.

    ``pool="instances"`` pools all instance values; ``pool="dataset_means"``
    first averages each (group, dataset, model) and summarises those means.
    Degenerate records are counted but excluded; skipped ones are ignored.
    """
    records = list(records)
    if not records:
        raise EmptySelection("no records to aggregate")
    if pool not in ("instances", "dataset_means"):
        raise InvalidParameter(f"unknown pooling {pool!r}")
    group_by = tuple(group_by)

    values: dict[tuple, list] = {}
    degenerate: dict[tuple, int] = {}
    for r in records:
        key = tuple((g, getattr(r, g)) for g in group_by)
        if r.status == DEGENERATE:
            degenerate[key] = degenerate.get(key, 0) + 1
            values.setdefault(key, [])
        elif r.usable:
            sub = (r.dataset, r.model) if pool == "dataset_means" else None
            values.setdefault(key, []).append((sub, r.value))

    stats = []
    for key in sorted(values, key=lambda k: tuple(str(v) for _, v in k)):
        entries = values[key]
        if not entries:
            logger.warning("group %s has only degenerate records", key)
            continue
        if pool == "dataset_means":
            buckets: dict = {}
            for sub, v in entries:
                buckets.setdefault(sub, []).append(v)
            vals = [float(np.mean(buckets[s])) for s in sorted(buckets)]
        else:
            vals = [v for _, v in entries]
        stats.append(AggregateStats(group=key, degenerate_count=degenerate.get(key, 0), **summarize(vals)))
    if not stats:
        raise EmptySelection("every record is degenerate or skipped")
    return stats
