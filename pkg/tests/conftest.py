import time

import numpy as np
import pytest

from tsxbench.catalog import CatalogConfig, DatasetId, build_dataset
from tsxbench.nn import TrainConfig, build_model, train
from tsxbench.nn.models import LinearScorer
from helpers import TIMINGS, VERDICTS


@pytest.fixture(scope="session")
def gaussian_middle():
    """Univariate Gaussian + Middle dataset at the default catalog size."""
    return build_dataset(DatasetId("Univariate", "Gaussian", "Middle"), CatalogConfig())


@pytest.fixture(scope="session")
def trained_cnn(gaussian_middle):
    """TemporalConv trained with the default protocol; returns (model, history)."""
    start = time.perf_counter()
    model = build_model("TemporalConv", *gaussian_middle.shape, seed=0)
    result = train(model, gaussian_middle.x_train, gaussian_middle.y_train, TrainConfig(seed=0))
    TIMINGS["trained_cnn"] = time.perf_counter() - start
    return result


@pytest.fixture
def linear_model():
    rng = np.random.default_rng(7)
    return LinearScorer(rng.normal(size=(2, 6)), bias=0.3)


@pytest.fixture(autouse=True)
def _isolated_home(tmp_path, monkeypatch):
    monkeypatch.setenv("XTSC_BENCH_HOME", str(tmp_path / "home"))


@pytest.fixture(scope="session")
def small_catalog():
    """Every catalog dataset with four train and four test instances."""
    from tsxbench.catalog import build_catalog

    return build_catalog(CatalogConfig(n_train=4, n_test=4))


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda v: int(v.split()[1])):
            terminalreporter.write_line(line)
