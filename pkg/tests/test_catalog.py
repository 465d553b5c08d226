import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from tsxbench.catalog import (
    CatalogConfig,
    DatasetId,
    SyntheticDataset,
    build_catalog,
    build_dataset,
    default_home,
    filter_catalog,
    load_catalog,
    load_dataset,
    save_catalog,
    save_dataset,
)
from tsxbench.errors import FormatError

FIXTURES = Path(__file__).parent / "fixtures"
SMALL = CatalogConfig(n_train=10, n_test=4)


@pytest.fixture(scope="module")
def small_catalog():
    return build_catalog(SMALL)


def assert_same_dataset(a: SyntheticDataset, b: SyntheticDataset):
    assert a.id == b.id
    for field in ("x_train", "y_train", "x_test", "y_test", "mask_train", "mask_test"):
        np.testing.assert_array_equal(getattr(a, field), getattr(b, field))
    np.testing.assert_array_equal(a.normalization.minimum, b.normalization.minimum)
    np.testing.assert_array_equal(a.normalization.maximum, b.normalization.maximum)
    assert a.generation_spec == b.generation_spec
    assert a.constant == b.constant


def test_cardinality_and_shapes(small_catalog):
    assert len(small_catalog) == 120
    assert len({ds.name for ds in small_catalog}) == 120
    uni = [ds for ds in small_catalog if ds.id.arity == "Univariate"]
    multi = [ds for ds in small_catalog if ds.id.arity == "Multivariate"]
    assert len(uni) == len(multi) == 60
    assert {ds.shape for ds in uni} == {(1, 50)}
    assert {ds.shape for ds in multi} == {(50, 50)}


def test_labels_balanced_and_masks_consistent(small_catalog):
    for ds in small_catalog:
        for y in (ds.y_train, ds.y_test):
            assert abs(y.mean() - 0.5) <= 0.1
        assert ds.mask_train.any(axis=(1, 2)).all()
        if ds.id.feature in ("Middle", "SmallMiddle", "RareTime", "RareFeature"):
            assert (ds.mask_train == ds.mask_train[0]).all()


def test_moving_masks_differ():
    ds = build_dataset(DatasetId("Multivariate", "Gaussian", "MovingMiddle"), CatalogConfig(n_train=50, n_test=2))
    flat = ds.mask_train.reshape(50, -1)
    pairs = [(i, j) for i in range(50) for j in range(i + 1, 50)]
    differ = np.mean([not np.array_equal(flat[i], flat[j]) for i, j in pairs])
    assert differ > 0.9


def test_train_split_is_normalised(small_catalog):
    for ds in small_catalog[:10]:
        assert ds.x_train.min() >= 0 and ds.x_train.max() <= 1


def test_filter_rare(small_catalog):
    kept = filter_catalog(small_catalog, ["Rare"])
    assert kept and all("Rare" in ds.id.feature for ds in kept)
    assert len(kept) == 4 * 6 * 2  # four rare kinds, six processes, two arities


def test_filter_empty_keeps_all(small_catalog):
    assert len(filter_catalog(small_catalog, [])) == 120


def test_filter_union(small_catalog):
    kept = {ds.name for ds in filter_catalog(small_catalog, ["Gaussian", "Middle"])}
    oracle = {ds.name for ds in small_catalog
              if "gaussian" in ds.name.lower() or "middle" in ds.id.feature.lower()}
    assert kept == oracle


def test_filter_nothing_warns(small_catalog):
    with pytest.warns(UserWarning):
        assert filter_catalog(small_catalog, ["NoSuchKind"]) == []


def test_round_trip_is_bit_exact(tmp_path, small_catalog):
    for ds in small_catalog[::17]:
        assert_same_dataset(load_dataset(save_dataset(ds, tmp_path / ds.name)), ds)


def test_serialisation_is_deterministic(tmp_path):
    cfg = CatalogConfig(n_train=6, n_test=2, types=("Harmonic",))
    save_catalog(build_catalog(cfg), tmp_path / "a", cfg)
    save_catalog(build_catalog(cfg), tmp_path / "b", cfg)
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert files
    for rel in files:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_load_catalog_filters(tmp_path):
    cfg = CatalogConfig(n_train=4, n_test=2, types=("Narma",), arities=("Univariate",))
    save_catalog(build_catalog(cfg), tmp_path)
    assert len(load_catalog(tmp_path)) == 10
    assert [d.id.feature for d in load_catalog(tmp_path, ["PositionalTime"])] == ["PositionalTime"]


def _saved(tmp_path, ds):
    return save_dataset(ds, tmp_path / "ds")


def test_shape_mismatch_rejected(tmp_path, small_catalog):
    path = _saved(tmp_path, small_catalog[0])
    manifest = json.loads((path / "manifest.json").read_text())
    manifest["shape"] = [1, 49]
    manifest["normalization"]["min"] = manifest["normalization"]["min"][:1]
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(FormatError, match="shape"):
        load_dataset(path)


@pytest.mark.parametrize("field", ["format_version", "shape", "id", "normalization"])
def test_missing_field_is_named(tmp_path, small_catalog, field):
    path = _saved(tmp_path, small_catalog[0])
    manifest = json.loads((path / "manifest.json").read_text())
    del manifest[field]
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(FormatError, match=field):
        load_dataset(path)


def test_row_count_mismatch_rejected(tmp_path, small_catalog):
    path = _saved(tmp_path, small_catalog[0])
    lines = (path / "test.csv").read_text().splitlines(keepends=True)
    (path / "test.csv").write_text("".join(lines[:-1]))
    with pytest.raises(FormatError, match="n_test"):
        load_dataset(path)


def test_unsupported_version(tmp_path, small_catalog):
    path = _saved(tmp_path, small_catalog[0])
    manifest = json.loads((path / "manifest.json").read_text())
    manifest["format_version"] = "9.0"
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(FormatError, match="format_version"):
        load_dataset(path)


def test_older_format_version_loads(tmp_path):
    src = FIXTURES / "format_1_0" / "Univariate_Gaussian_Middle"
    ds = load_dataset(shutil.copytree(src, tmp_path / "old"))
    assert ds.has_masks and ds.constant == 1.0
    assert ds.shape == (1, 8) and len(ds.x_train) == 6 and len(ds.x_test) == 4
    assert ds.generation_spec.t_steps == 8


def test_home_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("XTSC_BENCH_HOME", str(tmp_path / "bench"))
    assert default_home() == tmp_path / "bench"
    monkeypatch.delenv("XTSC_BENCH_HOME")
    assert default_home() == Path.home() / ".tsxbench"


def test_reference_sample_is_normalised_process_draw():
    ds = build_dataset(DatasetId("Univariate", "Gaussian", "Middle"), CatalogConfig(n_train=4, n_test=2))
    ref = ds.reference_sample(5)
    raw = ds.normalization.invert(ref)
    assert ref.shape == (1, 50)
    np.testing.assert_array_equal(ref, ds.reference_sample(5))
    assert abs(raw.mean()) < 0.5
