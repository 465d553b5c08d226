"""Synthetic-data benchmark for time-series classifier explanations.

Typical use::

    from tsxbench import BenchmarkPlan, evaluate_synthetic, aggregate
    records = evaluate_synthetic(BenchmarkPlan(types=["Middle"]))
    stats = aggregate(records)
"""
__version__ = "0.1.0"

from .catalog import CatalogConfig, SyntheticDataset, build_catalog, load_catalog, load_dataset  # noqa: E402
from .harness import (  # noqa: E402
    AggregateStats,
    BenchmarkPlan,
    MetricRecord,
    aggregate,
    evaluate,
    evaluate_synthetic,
)

__all__ = [
    "AggregateStats", "BenchmarkPlan", "CatalogConfig", "MetricRecord", "SyntheticDataset",
    "aggregate", "build_catalog", "evaluate", "evaluate_synthetic", "load_catalog", "load_dataset",
]
