"""Command-line front end: ``generate``, ``train``, ``evaluate`` and ``report``.

Settings come from built-in defaults, then an optional YAML/JSON file given
with ``--config``, then command-line flags (flags win).  The data root
defaults to ``$XTSC_BENCH_HOME`` or ``~/.tsxbench``.  Every command writes
the resolved settings to ``run_manifest.json`` in its output directory.

Exit codes: 0 ok, 2 configuration error, 3 empty selection, 4 I/O or file
format error, 5 internal error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import shutil
import sys
import traceback
from pathlib import Path

import yaml

from . import metrics as M
from .catalog import CatalogConfig, build_catalog, default_home, load_catalog, load_dataset, save_catalog
from .errors import BenchError, EmptySelection, FormatError, InvalidParameter, InvalidShape, IoError, MissingCapability
from .explainers import load_explanation, resolve_name
from .harness import BenchmarkPlan, RunLog, aggregate, evaluate, evaluate_synthetic, train_pairs
from .nn.checkpoint import load_model, read_manifest, save_model
from .nn.models import ARCHITECTURES, build_model
from .nn.training import TrainConfig
from .report import emit_report, read_records, write_json

logger = logging.getLogger("tsxbench")

EXIT_OK, EXIT_CONFIG, EXIT_EMPTY, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4, 5
ACCURACY_FIELDS = ("dataset", "architecture", "train_acc", "test_acc", "epochs_run")

DEFAULTS = {
    "home": None,               # data root; None -> $XTSC_BENCH_HOME or ~/.tsxbench
    "catalog_dir": None,        # None -> <home>/catalog
    "models_dir": None,         # None -> <home>/models
    "out": None,                # None -> command default under <home>
    "seed": 0,
    "types": [],
    "models": ["TemporalConv"],
    "explainers": ["saliency", "smoothgrad", "occlusion"],
    "metrics": list(M.METRICS),
    "workers": None,            # None -> available cores
    "force": False,
    "n_train": 100,
    "n_test": 50,
    "max_instances": None,      # test instances scored per dataset; None -> all
    "accuracy_gate": 0.9,
    "train_missing": False,     # evaluate: train models that have no checkpoint
    "attributions": None,       # evaluate: directory of external attribution files
    "data": None,               # evaluate: custom dataset directory
    "records": None,            # report: records.csv to aggregate
    "group_by": ["explainer", "metric"],
    "pool": "instances",
    "formats": ["csv", "json", "svg"],
    "training": {"max_epochs": 500, "patience": 20, "learning_rate": 1e-3, "batch_size": 32},
    "robustness": {"radius": 0.1, "n_perturbations": 10, "norm": "L2"},
    "faithfulness": {"baseline_source": "GenerationProcess", "subset_fraction": 0.1, "n_runs": 20,
                     "readout": "probability"},
}
LIST_KEYS = ("types", "models", "explainers", "metrics", "group_by", "formats")


class ConfigError(BenchError):
    pass


# ------------------------------------------------------------------ config

def _split(value):
    if value is None:
        return None
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return list(value)


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return doc


def _merge(base: dict, override: dict, where: str = "") -> dict:
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where}{key!r} must be a mapping")
            _merge(base[key], value, f"{where}{key}.")
        else:
            base[key] = value
    return base


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then flags; paths and names validated."""
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        _merge(cfg, load_config_file(args.config))
    flags = {
        "home": args.home, "catalog_dir": args.catalog, "models_dir": args.models_dir, "out": args.out,
        "seed": args.seed, "types": _split(args.types), "models": _split(args.models),
        "explainers": _split(args.explainers), "metrics": _split(args.metrics), "workers": args.workers,
        "max_instances": args.max_instances, "n_train": args.n_train, "n_test": args.n_test,
        "attributions": args.attributions, "data": args.data, "records": args.records,
        "pool": args.pool, "group_by": _split(args.group_by),
    }
    _merge(cfg, {k: v for k, v in flags.items() if v is not None})
    if args.force:
        cfg["force"] = True
    if args.train_missing:
        cfg["train_missing"] = True
    if args.max_epochs is not None:
        cfg["training"]["max_epochs"] = args.max_epochs
        cfg["training"]["patience"] = min(cfg["training"]["patience"], args.max_epochs - 1)

    for key in LIST_KEYS:
        cfg[key] = _split(cfg[key]) or []
    try:
        cfg["seed"] = int(cfg["seed"])
        if not 0 <= cfg["seed"] < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        cfg["workers"] = int(cfg["workers"] or os.cpu_count() or 1)
        if cfg["workers"] < 1:
            raise ValueError("workers must be >= 1")
        cfg["models"] = [build_model(m, 1, 2).architecture for m in cfg["models"]]
        cfg["explainers"] = [resolve_name(e) for e in cfg["explainers"]]
        cfg["metrics"] = [M.resolve_metric(m) for m in cfg["metrics"]]
        if cfg["pool"] not in ("instances", "dataset_means"):
            raise ValueError(f"pool must be instances or dataset_means, not {cfg['pool']!r}")
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc).strip("'\"")) from exc

    home = Path(cfg["home"]).expanduser() if cfg["home"] else default_home()
    cfg["home"] = str(home)
    cfg["catalog_dir"] = str(Path(cfg["catalog_dir"]).expanduser() if cfg["catalog_dir"] else home / "catalog")
    cfg["models_dir"] = str(Path(cfg["models_dir"]).expanduser() if cfg["models_dir"] else home / "models")
    default_out = {"generate": cfg["catalog_dir"], "train": cfg["models_dir"]}.get(args.command, home / "report")
    cfg["out"] = str(Path(cfg["out"]).expanduser() if cfg["out"] else default_out)
    return cfg


def _train_config(cfg: dict) -> TrainConfig:
    try:
        return TrainConfig(**cfg["training"])
    except (TypeError, InvalidParameter) as exc:
        raise ConfigError(f"training: {exc}") from exc


def _plan(cfg: dict) -> BenchmarkPlan:
    try:
        return BenchmarkPlan(
            types=cfg["types"], models=cfg["models"], explainers=cfg["explainers"], metrics=cfg["metrics"],
            seed=cfg["seed"], workers=cfg["workers"], max_instances=cfg["max_instances"],
            accuracy_gate=float(cfg["accuracy_gate"]),
            robustness=M.RobustnessParams(**cfg["robustness"]),
            faithfulness=M.FaithfulnessParams(**cfg["faithfulness"]),
            training=_train_config(cfg),
        )
    except (TypeError, InvalidParameter) as exc:
        raise ConfigError(str(exc)) from exc


def _manifest(command: str, cfg: dict, **extra) -> dict:
    return {"command": command, "config": cfg, **extra}


def _catalog_config(cfg: dict) -> CatalogConfig:
    return CatalogConfig(n_train=int(cfg["n_train"]), n_test=int(cfg["n_test"]),
                         master_seed=cfg["seed"], types=tuple(cfg["types"]))


# ---------------------------------------------------------------- commands

def _prepare_output(out: Path, force: bool) -> None:
    if out.exists() and not out.is_dir():
        raise IoError(f"output path {out} is not a directory")
    if out.exists() and any(out.iterdir()):
        if not force:
            raise IoError(f"output directory {out} is not empty (use --force to overwrite)")
        # only remove what a previous run produced
        for child in out.iterdir():
            if child.is_dir() and (child / "manifest.json").exists():
                shutil.rmtree(child)
            elif child.name in ("catalog.json", "run_manifest.json"):
                child.unlink()
    out.mkdir(parents=True, exist_ok=True)


def cmd_generate(cfg: dict) -> int:
    out = Path(cfg["out"])
    config = _catalog_config(cfg)
    if not config.dataset_ids():
        raise EmptySelection(f"no dataset matches types {cfg['types']}")
    _prepare_output(out, cfg["force"])
    catalog = build_catalog(config, workers=cfg["workers"])
    save_catalog(catalog, out, config)
    write_json(out / "run_manifest.json", _manifest("generate", cfg, datasets=[ds.name for ds in catalog]))
    logger.info("wrote %d datasets to %s", len(catalog), out)
    return EXIT_OK


def _load_selected_catalog(cfg: dict):
    root = Path(cfg["catalog_dir"])
    if not root.is_dir():
        raise IoError(f"catalog directory {root} does not exist; run `tsxbench generate` first")
    catalog = load_catalog(root, cfg["types"])
    if not catalog:
        raise EmptySelection(f"no dataset in {root} matches types {cfg['types']}")
    return catalog


def _checkpoint_dir(root, dataset: str, architecture: str) -> Path:
    return Path(root) / dataset / architecture


def cmd_train(cfg: dict) -> int:
    catalog = _load_selected_catalog(cfg)
    out = Path(cfg["out"])
    train_cfg = _train_config(cfg)
    rows, pending = {}, []
    for ds in catalog:
        for arch in cfg["models"]:
            ckpt = _checkpoint_dir(out, ds.name, arch)
            if (ckpt / "model.json").exists():
                info = read_manifest(ckpt).get("extra", {})
                if all(k in info for k in ACCURACY_FIELDS):
                    logger.info("resume: %s/%s already trained", ds.name, arch)
                    rows[(ds.name, arch)] = info
                    continue
            pending.append((ds, arch))
    trained = train_pairs(pending, cfg["seed"], train_cfg, cfg["workers"]) if pending else {}
    for (name, arch), (model, info) in sorted(trained.items()):
        save_model(model, _checkpoint_dir(out, name, arch), extra=info)
        rows[(name, arch)] = info
        if info["test_acc"] <= 0.9:
            logger.warning("%s on %s reached only %.3f test accuracy", arch, name, info["test_acc"])

    with open(out / "accuracy.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ACCURACY_FIELDS)
        for ds in catalog:
            for arch in cfg["models"]:
                info = rows[(ds.name, arch)]
                writer.writerow([info["dataset"], info["architecture"], repr(float(info["train_acc"])),
                                 repr(float(info["test_acc"])), int(info["epochs_run"])])
    write_json(out / "run_manifest.json", _manifest("train", cfg))
    return EXIT_OK


def _load_models(cfg: dict, catalog) -> dict:
    models, missing = {}, []
    for ds in catalog:
        for arch in cfg["models"]:
            ckpt = _checkpoint_dir(cfg["models_dir"], ds.name, arch)
            if (ckpt / "model.json").exists():
                models[(ds.name, arch)] = load_model(ckpt)
            else:
                missing.append(f"{ds.name}/{arch}")
    if missing and not cfg["train_missing"]:
        raise MissingCapability(
            f"no checkpoint for {', '.join(missing[:5])}{' ...' if len(missing) > 5 else ''} under "
            f"{cfg['models_dir']}; run `tsxbench train` or pass --train-missing")
    return models


def _external_attributions(root: Path, ds) -> dict[str, list]:
    """``{explainer: [(instance, Attribution), ...]}`` from ``root/<dataset>/``."""
    folder = root / ds.name
    if not folder.is_dir():
        return {}
    files = sorted(folder.glob("*.json")) + sorted(folder.glob("*.csv"))
    csv_stems = {p.stem for p in files if p.suffix == ".csv"}
    grouped: dict[str, list] = {}
    for path in files:
        if path.suffix == ".json" and path.stem in csv_stems:
            continue  # sidecar of a CSV file
        with open(path if path.suffix == ".json" else path.with_suffix(".json")) as fh:
            meta = json.load(fh)
        if "instance" not in meta:
            raise FormatError(f"{path.name}: missing field 'instance'")
        idx = int(meta["instance"])
        if not 0 <= idx < len(ds.x_test):
            raise FormatError(f"{path.name}: instance {idx} outside the test split")
        attr, _ = load_explanation(path, x=ds.x_test[idx], expected_shape=ds.shape)
        grouped.setdefault(attr.explainer, []).append((idx, attr))
    return grouped


def _evaluate_external(cfg: dict, catalog) -> list:
    root = Path(cfg["attributions"])
    if not root.is_dir():
        raise IoError(f"attribution directory {root} does not exist")
    if {"sens_max", "sens_mean"} & set(cfg["metrics"]):
        raise MissingCapability("robustness needs a live explainer; stored attributions cannot be re-run")
    needs_model = "faithfulness" in cfg["metrics"]
    faith = M.FaithfulnessParams(**cfg["faithfulness"])
    records = []
    for ds in catalog:
        for explainer, items in sorted(_external_attributions(root, ds).items()):
            items.sort(key=lambda p: p[0])
            for arch in cfg["models"] if needs_model else [None]:
                model = None
                if arch is not None:
                    ckpt = _checkpoint_dir(cfg["models_dir"], ds.name, arch)
                    if not (ckpt / "model.json").exists():
                        raise MissingCapability(f"faithfulness needs a checkpoint at {ckpt}")
                    model = load_model(ckpt)
                records.extend(evaluate(
                    ds, model=model, attributions={explainer: [a for _, a in items]},
                    instances=[i for i, _ in items], metrics=cfg["metrics"], seed=cfg["seed"],
                    faithfulness=faith,
                ))
    if not records:
        raise EmptySelection(f"no attribution files found under {root} for the selected datasets")
    return records


def cmd_evaluate(cfg: dict) -> int:
    out = Path(cfg["out"])
    if cfg["data"]:
        catalog = [load_dataset(cfg["data"])]
    else:
        catalog = _load_selected_catalog(cfg)
    run_log = RunLog()
    if cfg["attributions"]:
        records = _evaluate_external(cfg, catalog)
    else:
        plan = _plan(cfg)
        models = _load_models(cfg, catalog)
        records = evaluate_synthetic(plan, catalog=catalog, models=models, run_log=run_log)
    stats = aggregate(records, cfg["group_by"], cfg["pool"])
    manifest = _manifest("evaluate", cfg, seeds={"master": cfg["seed"]},
                         accuracies=run_log.accuracies, gate_skips=run_log.gate_skips,
                         n_records=len(records))
    emit_report(stats, records, out, cfg["formats"], manifest)
    logger.info("wrote %d records to %s", len(records), out)
    return EXIT_OK


def cmd_report(cfg: dict) -> int:
    out = Path(cfg["out"])
    source = Path(cfg["records"]) if cfg["records"] else out / "records.csv"
    try:
        records = read_records(source)
    except FileNotFoundError as exc:
        raise IoError(f"records file {source} does not exist") from exc
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{source}: {exc}") from exc
    if cfg["metrics"] != list(M.METRICS):
        records = [r for r in records if r.metric in cfg["metrics"]]
    if cfg["explainers"] != DEFAULTS["explainers"]:
        records = [r for r in records if r.explainer in cfg["explainers"]]
    stats = aggregate(records, cfg["group_by"], cfg["pool"])
    emit_report(stats, records, out, cfg["formats"], _manifest("report", cfg, source=str(source)))
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate, "report": cmd_report}


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON settings file; flags override it")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--types", help="comma-separated process / feature-kind name filters")
    common.add_argument("--models", help=f"comma-separated architectures ({', '.join(ARCHITECTURES)})")
    common.add_argument("--explainers", help="comma-separated explainer names")
    common.add_argument("--metrics", help=f"comma-separated metrics ({', '.join(M.METRICS)})")
    common.add_argument("--workers", type=int, help="parallel worker processes (default: all cores)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    common.add_argument("--home", help="data root (default: $XTSC_BENCH_HOME or ~/.tsxbench)")
    common.add_argument("--catalog", help="catalog directory (default: <home>/catalog)")
    common.add_argument("--models-dir", help="checkpoint directory (default: <home>/models)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="tsxbench", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    gen = sub.add_parser("generate", parents=[common], help="build the synthetic dataset catalog")
    trn = sub.add_parser("train", parents=[common], help="train one classifier per dataset and architecture")
    evl = sub.add_parser("evaluate", parents=[common], help="explain and score, then write a report")
    rep = sub.add_parser("report", parents=[common], help="re-aggregate a records.csv into a report")
    for p in (gen, trn, evl, rep):
        p.set_defaults(n_train=None, n_test=None, max_epochs=None, max_instances=None, attributions=None,
                       data=None, records=None, pool=None, group_by=None, train_missing=False)
    gen.add_argument("--n-train", type=int, help="training instances per dataset")
    gen.add_argument("--n-test", type=int, help="test instances per dataset")
    trn.add_argument("--max-epochs", type=int, help="training epoch budget")
    evl.add_argument("--max-epochs", type=int, help="epoch budget with --train-missing")
    evl.add_argument("--max-instances", type=int, help="score at most this many test instances per dataset")
    evl.add_argument("--attributions", help="directory of external attribution files, one subfolder per dataset")
    evl.add_argument("--data", help="custom dataset directory instead of the catalog")
    evl.add_argument("--train-missing", action="store_true", help="train models without a checkpoint")
    for p in (evl, rep):
        p.add_argument("--pool", choices=("instances", "dataset_means"), help="aggregation pooling")
        p.add_argument("--group-by", help="comma-separated record fields to group statistics by")
    rep.add_argument("--records", help="records.csv to aggregate (default: <out>/records.csv)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except EmptySelection as exc:
        print(f"tsxbench: empty selection: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (ConfigError, MissingCapability, InvalidParameter) as exc:
        print(f"tsxbench: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError, InvalidShape) as exc:
        print(f"tsxbench: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception:  # noqa: BLE001 - last-resort reporting
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
