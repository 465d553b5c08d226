"""Report files: record and statistics dumps plus boxplot figures.

Boxplots use a fixed figure size and axes rectangle so a value ``v`` maps
to the SVG coordinate given by :func:`svg_y`.  Each box, median line and
mean line carries the id ``box-<label>``, ``median-<label>`` or
``mean-<label>`` so it can be located in the file.
"""
from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path
from typing import Iterable

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from . import __version__
from .errors import EmptySelection, IoError
from .harness import RECORD_FIELDS, STATS_FIELDS, AggregateStats, MetricRecord
from .seeding import RNG_SCHEME

FIGSIZE = (6.4, 4.0)  # inches; SVG user units are points (72 per inch)
AXES_RECT = (0.12, 0.25, 0.83, 0.65)  # left, bottom, width, height in figure fractions
SVG_RC = {"svg.hashsalt": "tsxbench", "svg.fonttype": "none", "path.simplify": False}
FORMATS = ("csv", "json", "svg")


def _num(v) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def _json_safe(obj):
    if isinstance(obj, float):
        return None if not math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def write_json(path: Path, obj) -> Path:
    with open(path, "w") as fh:
        json.dump(_json_safe(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_records(records: Iterable[MetricRecord], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_FIELDS)
        for r in sorted(records, key=MetricRecord.sort_key):
            writer.writerow(r.as_row())
    return path


def read_records(path) -> list[MetricRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(MetricRecord(
                dataset=row["dataset"], model=row["model"], explainer=row["explainer"],
                instance=int(row["instance"]), metric=row["metric"],
                value=float(row["value"]) if row["value"] else math.nan,
                status=row["status"], reason=row["reason"],
            ))
    return out


def write_stats_csv(stats: Iterable[AggregateStats], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STATS_FIELDS)
        for s in stats:
            writer.writerow([s.label, _num(s.mean), _num(s.median), _num(s.q1), _num(s.q3),
                             _num(s.min), _num(s.max), s.count, s.degenerate_count])
    return path


# ------------------------------------------------------------------ boxplot

def y_limits(stats: list[AggregateStats]) -> tuple[float, float]:
    lo = min(s.min for s in stats)
    hi = max(s.max for s in stats)
    pad = 0.05 * (hi - lo) if hi > lo else 0.5
    return lo - pad, hi + pad


def svg_y(value: float, ylim: tuple[float, float]) -> float:
    """SVG y coordinate (points, origin top-left) of a data value on the plot."""
    height = FIGSIZE[1] * 72.0
    bottom, axes_h = AXES_RECT[1], AXES_RECT[3]
    frac = (value - ylim[0]) / (ylim[1] - ylim[0])
    return height * (1.0 - (bottom + axes_h * frac))


def box_id(label: str) -> str:
    return "box-" + "".join(c if c.isalnum() or c in "-_" else "_" for c in label)


def boxplot(stats: list[AggregateStats], path, title: str = "") -> Path:
    """One box per group: Q1-Q3 box, solid median, dotted mean, whiskers at min/max."""
    if not stats:
        raise EmptySelection("nothing to plot")
    labels = ["/".join(str(v) for k, v in s.group if k != "metric") or s.label for s in stats]
    ylim = y_limits(stats)
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=FIGSIZE)
        FigureCanvasSVG(fig)
        ax = fig.add_axes(AXES_RECT)
        boxes = [{"label": lab, "med": s.median, "q1": s.q1, "q3": s.q3, "whislo": s.min,
                  "whishi": s.max, "mean": s.mean, "fliers": []} for lab, s in zip(labels, stats)]
        art = ax.bxp(boxes, showmeans=True, meanline=True, showfliers=False,
                     medianprops={"color": "tab:orange", "linestyle": "-"},
                     meanprops={"color": "tab:green", "linestyle": ":"})
        for lab, box, med, mean in zip(labels, art["boxes"], art["medians"], art["means"]):
            box.set_gid(box_id(lab))
            med.set_gid("median-" + box_id(lab)[4:])
            mean.set_gid("mean-" + box_id(lab)[4:])
        ax.set_ylim(*ylim)
        ax.tick_params(axis="x", labelrotation=45, labelsize=7)
        if title:
            ax.set_title(title)
        fig.savefig(path, format="svg", metadata={"Date": None})
    return Path(path)


# ------------------------------------------------------------------- report

def versions() -> dict:
    import scipy

    return {"tsxbench": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__, "python": platform.python_version(),
            "rng": RNG_SCHEME}


def emit_report(stats: list[AggregateStats], records: Iterable[MetricRecord], out_dir,
                formats: Iterable[str] = FORMATS, manifest: dict | None = None) -> list[Path]:
    """Write the report set into ``out_dir`` and return the written paths."""
    formats = [f.lower() for f in formats]
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}")
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "csv" in formats:
            written.append(write_records(records, out / "records.csv"))
            written.append(write_stats_csv(stats, out / "stats.csv"))
        if "json" in formats:
            written.append(write_json(out / "stats.json", [s.as_dict() for s in stats]))
        if "svg" in formats:
            by_metric: dict[str, list[AggregateStats]] = {}
            for s in stats:
                by_metric.setdefault(str(dict(s.group).get("metric", "all")), []).append(s)
            for metric, group in sorted(by_metric.items()):
                written.append(boxplot(group, out / f"boxplot_{metric}.svg", title=metric))
        if manifest is not None:
            written.append(write_json(out / "run_manifest.json", {**manifest, "versions": versions()}))
    except OSError as exc:
        raise IoError(f"cannot write report to {out}: {exc}") from exc
    return written
