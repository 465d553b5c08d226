"""Synthetic benchmark catalog: assembly, filtering and on-disk persistence.

On disk a dataset is a directory holding ``manifest.json`` and four CSV
files (``train.csv``, ``test.csv``, ``train_mask.csv``, ``test_mask.csv``).
Each CSV row is one instance flattened feature-major (cell ``(i, t)`` in
column ``i*T + t``) followed by a ``label`` column.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError
from .injection import (
    FeatureKind,
    LocationMode,
    MaskSpec,
    NormalizationParams,
    build_mask,
    fit_normalization,
    inject_label,
)
from .processes import GenerationSpec, ProcessKind, ProcessParams, generate_base, sample_reference
from .seeding import RNG_SCHEME, derive_seed

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1.1"
SUPPORTED_VERSIONS = ("1.0", "1.1")

UNIVARIATE = "Univariate"
MULTIVARIATE = "Multivariate"
ARITY_FEATURES = {UNIVARIATE: 1, MULTIVARIATE: 50}


@dataclass(frozen=True, order=True)
class DatasetId:
    arity: str
    process: str
    feature: str

    @property
    def name(self) -> str:
        return f"{self.arity}_{self.process}_{self.feature}"

    @classmethod
    def parse(cls, name: str) -> "DatasetId":
        parts = name.split("_")
        if len(parts) != 3:
            raise FormatError(f"dataset name {name!r} is not <arity>_<process>_<feature>")
        return cls(*parts)


@dataclass
class CatalogConfig:
    n_train: int = 100
    n_test: int = 50
    master_seed: int = 0
    t_steps: int = 50
    arities: tuple[str, ...] = (UNIVARIATE, MULTIVARIATE)
    multivariate_features: int = 50
    constant: float = 1.0
    processes: tuple[str, ...] = tuple(p.value for p in ProcessKind)
    features: tuple[str, ...] = tuple(f.value for f in FeatureKind)
    types: tuple[str, ...] = ()

    def n_features(self, arity: str) -> int:
        return 1 if arity == UNIVARIATE else self.multivariate_features

    def dataset_ids(self) -> list[DatasetId]:
        ids = [
            DatasetId(arity, process, feature)
            for arity in self.arities
            for process in self.processes
            for feature in self.features
        ]
        return [i for i in ids if _matches(i, self.types)]


@dataclass
class SyntheticDataset:
    """One labelled dataset; arrays are already normalised.

    ``x_*`` have shape ``(n, N, T)``, ``y_*`` shape ``(n,)`` and ``mask_*``
    shape ``(n, N, T)`` or ``None`` for custom data without ground truth.
    """

    id: DatasetId
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    mask_train: np.ndarray | None
    mask_test: np.ndarray | None
    normalization: NormalizationParams
    generation_spec: GenerationSpec | None = None
    constant: float = 1.0
    master_seed: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.id.name

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.x_train.shape[1:])

    @property
    def has_masks(self) -> bool:
        return self.mask_train is not None and self.mask_test is not None

    def split(self, which: str):
        if which == "train":
            return self.x_train, self.y_train, self.mask_train
        if which == "test":
            return self.x_test, self.y_test, self.mask_test
        raise ValueError(which)

    def reference_sample(self, seed: int) -> np.ndarray:
        """A normalised draw from the generating process, used as baseline."""
        if self.generation_spec is None:
            raise ValueError(f"{self.name} has no generation process")
        raw = sample_reference(self.generation_spec, self.shape, seed)
        return self.normalization.apply(raw)

    def train_mean(self) -> np.ndarray:
        return np.broadcast_to(self.x_train.mean(axis=(0, 2))[:, None], self.shape).copy()


def _matches(ds_id: DatasetId, types) -> bool:
    if not types:
        return True
    names = (ds_id.process.lower(), ds_id.feature.lower(), ds_id.name.lower())
    return any(t.lower() in n for t in types for n in names)


def build_dataset(ds_id: DatasetId, config: CatalogConfig) -> SyntheticDataset:
    n_features = config.n_features(ds_id.arity)
    base_spec = GenerationSpec(
        ProcessKind(ds_id.process),
        ProcessParams(),
        seed=derive_seed(config.master_seed, ds_id.name, "process"),
        t_steps=config.t_steps,
        n_features=n_features,
    )
    mask_spec = MaskSpec(FeatureKind(ds_id.feature))
    additive = mask_spec.location_mode is LocationMode.POSITIONAL
    shape = (n_features, config.t_steps)

    splits = {}
    for split, count in (("train", config.n_train), ("test", config.n_test)):
        xs, ys, ms = [], [], []
        for index in range(count):
            seed = derive_seed(config.master_seed, ds_id.name, split, index)
            label = index % 2
            series = generate_base(base_spec.with_seed(derive_seed(seed, "base")))
            mask = build_mask(mask_spec, shape, derive_seed(seed, "mask"), label=label)
            inst = inject_label(series, mask, label, config.constant, additive=additive)
            xs.append(inst.series)
            ys.append(inst.label)
            ms.append(inst.mask)
        splits[split] = (
            np.stack(xs) if xs else np.zeros((0, *shape)),
            np.asarray(ys, dtype=np.int64),
            np.stack(ms) if ms else np.zeros((0, *shape), dtype=bool),
        )

    x_train, y_train, m_train = splits["train"]
    x_test, y_test, m_test = splits["test"]
    norm = fit_normalization(x_train)
    return SyntheticDataset(
        id=ds_id,
        x_train=norm.apply(x_train),
        y_train=y_train,
        x_test=norm.apply(x_test),
        y_test=y_test,
        mask_train=m_train,
        mask_test=m_test,
        normalization=norm,
        generation_spec=base_spec,
        constant=config.constant,
        master_seed=config.master_seed,
    )


def _build_one(args):
    return build_dataset(*args)


def build_catalog(config: CatalogConfig | None = None, workers: int = 1) -> list[SyntheticDataset]:
    """Every (arity, process, feature kind) dataset selected by ``config``."""
    config = config or CatalogConfig()
    ids = config.dataset_ids()
    if workers > 1 and len(ids) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_build_one, [(i, config) for i in ids]))
    return [build_dataset(i, config) for i in ids]


def filter_catalog(catalog: list[SyntheticDataset], types) -> list[SyntheticDataset]:
    """Keep datasets whose process or feature-kind name contains any of ``types``.

    Matching is a case-insensitive substring test (the full dataset name
    is also tried, so ``Univariate_Gaussian`` works); an empty ``types`` keeps
    everything.  A filter that selects nothing warns and returns ``[]``.
    """
    types = [t for t in (types or []) if t]
    kept = [ds for ds in catalog if _matches(ds.id, types)]
    if types and not kept:
        warnings.warn(f"type filter {types} matched no dataset", stacklevel=2)
    return kept


# ---------------------------------------------------------------- persistence

def _write_rows(path: Path, values: np.ndarray, labels: np.ndarray, fmt) -> None:
    n_cols = values.shape[1] * values.shape[2] if values.ndim == 3 else 0
    with open(path, "w", newline="") as fh:
        fh.write(",".join([f"c{j}" for j in range(n_cols)] + ["label"]) + "\n")
        for row, label in zip(values.reshape(len(values), -1), labels):
            fh.write(",".join(map(fmt, row.tolist())) + f",{int(label)}\n")


def _read_rows(path: Path, shape: tuple[int, int], dtype) -> tuple[np.ndarray, np.ndarray]:
    n_features, t_steps = shape
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-1] != "label":
            raise FormatError(f"{path.name}: missing header with trailing 'label' column")
        if len(header) - 1 != n_features * t_steps:
            raise FormatError(
                f"{path.name}: shape: manifest declares {n_features}x{t_steps} cells "
                f"but the header has {len(header) - 1} data columns"
            )
        rows, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"{path.name}:{line_no}: expected {len(header)} fields, got {len(row)}")
            rows.append([float(v) for v in row[:-1]])
            labels.append(int(row[-1]))
    values = np.asarray(rows, dtype=np.float64).reshape(len(rows), n_features, t_steps)
    return values.astype(dtype), np.asarray(labels, dtype=np.int64)


def _require(manifest: dict, key: str):
    if key not in manifest:
        raise FormatError(f"manifest is missing field {key!r}")
    return manifest[key]


def save_dataset(ds: SyntheticDataset, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "name": ds.name,
        "id": {"arity": ds.id.arity, "process": ds.id.process, "feature": ds.id.feature},
        "shape": list(ds.shape),
        "n_train": int(len(ds.x_train)),
        "n_test": int(len(ds.x_test)),
        "master_seed": int(ds.master_seed),
        "generation": ds.generation_spec.to_dict() if ds.generation_spec else None,
        "normalization": ds.normalization.to_dict(),
        "injection_constant": ds.constant,
        "has_masks": ds.has_masks,
        "rng": RNG_SCHEME,
    }
    manifest.update({k: v for k, v in ds.extra.items() if k not in manifest})
    with open(path / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_rows(path / "train.csv", ds.x_train, ds.y_train, repr)
    _write_rows(path / "test.csv", ds.x_test, ds.y_test, repr)
    if ds.has_masks:
        _write_rows(path / "train_mask.csv", ds.mask_train, ds.y_train, lambda v: "1" if v else "0")
        _write_rows(path / "test_mask.csv", ds.mask_test, ds.y_test, lambda v: "1" if v else "0")
    return path


def load_dataset(path) -> SyntheticDataset:
    path = Path(path)
    try:
        with open(path / "manifest.json") as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise FormatError(f"{path}: no manifest.json") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}/manifest.json: invalid JSON ({exc})") from exc

    version = str(_require(manifest, "format_version"))
    if version not in SUPPORTED_VERSIONS:
        raise FormatError(f"format_version: unsupported version {version!r}")

    shape = _require(manifest, "shape")
    if not (isinstance(shape, list) and len(shape) == 2 and all(isinstance(s, int) and s > 0 for s in shape)):
        raise FormatError(f"shape: expected [N, T] positive integers, got {shape!r}")
    shape = tuple(shape)

    ident = _require(manifest, "id")
    try:
        ds_id = DatasetId(ident["arity"], ident["process"], ident["feature"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"id: expected arity/process/feature, got {ident!r}") from exc

    norm_raw = _require(manifest, "normalization")
    try:
        norm = NormalizationParams.from_dict(norm_raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"normalization: {exc}") from exc
    if norm.minimum.shape != (shape[0],) or norm.maximum.shape != (shape[0],):
        raise FormatError("normalization: min/max length does not match the feature count")

    # 1.0 manifests predate the explicit mask flag and injection constant
    has_masks = manifest.get("has_masks", (path / "train_mask.csv").exists())
    constant = float(manifest.get("injection_constant", 1.0))

    gen = manifest.get("generation")
    try:
        gen_spec = GenerationSpec.from_dict(gen) if gen else None
    except (KeyError, ValueError) as exc:
        raise FormatError(f"generation: {exc}") from exc

    x_train, y_train = _read_rows(path / "train.csv", shape, np.float64)
    x_test, y_test = _read_rows(path / "test.csv", shape, np.float64)
    for split, arr in (("train", x_train), ("test", x_test)):
        declared = manifest.get(f"n_{split}")
        if declared is not None and declared != len(arr):
            raise FormatError(f"n_{split}: manifest declares {declared} rows, {split}.csv has {len(arr)}")
    m_train = m_test = None
    if has_masks:
        m_train, _ = _read_rows(path / "train_mask.csv", shape, bool)
        m_test, _ = _read_rows(path / "test_mask.csv", shape, bool)
        if len(m_train) != len(x_train) or len(m_test) != len(x_test):
            raise FormatError("mask files do not have one row per instance")

    known = {"format_version", "name", "id", "shape", "n_train", "n_test", "master_seed",
             "generation", "normalization", "injection_constant", "has_masks", "rng"}
    return SyntheticDataset(
        id=ds_id,
        x_train=x_train,
        y_train=y_train,
        x_test=x_test,
        y_test=y_test,
        mask_train=m_train,
        mask_test=m_test,
        normalization=norm,
        generation_spec=gen_spec,
        constant=constant,
        master_seed=int(manifest.get("master_seed", 0)),
        extra={k: v for k, v in manifest.items() if k not in known},
    )


def save_catalog(catalog: list[SyntheticDataset], root, config: CatalogConfig | None = None) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for ds in catalog:
        save_dataset(ds, root / ds.name)
    index = {
        "format_version": FORMAT_VERSION,
        "rng": RNG_SCHEME,
        "datasets": [ds.name for ds in catalog],
    }
    if config is not None:
        index["config"] = {
            "n_train": config.n_train,
            "n_test": config.n_test,
            "master_seed": config.master_seed,
            "t_steps": config.t_steps,
            "constant": config.constant,
            "types": list(config.types),
        }
    with open(root / "catalog.json", "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return root


def catalog_names(root) -> list[str]:
    root = Path(root)
    index = root / "catalog.json"
    if index.exists():
        with open(index) as fh:
            return list(json.load(fh)["datasets"])
    return sorted(p.name for p in root.iterdir() if (p / "manifest.json").exists())


def load_catalog(root, types=()) -> list[SyntheticDataset]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"catalog directory {root} does not exist")
    names = catalog_names(root)
    selected = [n for n in names if _matches_name(n, types)]
    return [load_dataset(root / n) for n in selected]


def _matches_name(name: str, types) -> bool:
    try:
        return _matches(DatasetId.parse(name), types)
    except FormatError:
        return not types or any(t.lower() in name.lower() for t in types)


def default_home() -> Path:
    return Path(os.environ.get("XTSC_BENCH_HOME", Path.home() / ".tsxbench"))
