import math

import numpy as np
import pytest

from tsxbench.errors import DegenerateAttribution, DegenerateCorrelation, ExplainerFailure, InvalidParameter, MaskInfeasible
from tsxbench.metrics import (
    FaithfulnessParams,
    RobustnessParams,
    complexity,
    draw_baseline,
    faithfulness_corr,
    perturbations,
    relevance_mass_acc,
    relevance_rank_acc,
    resolve_metric,
    sens_max,
    sens_mean,
    sensitivity,
)
from tsxbench.nn.models import LinearScorer
from tsxbench.seeding import make_rng
from helpers import brute_complexity, brute_macc, brute_racc, random_pairs


def test_metrics_match_brute_force():
    for a, mask in random_pairs(1000):
        assert abs(complexity(a) - brute_complexity(a)) < 1e-12
        assert abs(relevance_rank_acc(a, mask) - brute_racc(a, mask)) < 1e-12
        assert abs(relevance_mass_acc(a, mask) - brute_macc(a, mask)) < 1e-12


def test_complexity_examples():
    assert abs(complexity(np.ones((1, 50))) - math.log(50)) < 1e-12
    one_hot = np.zeros((2, 5))
    one_hot[1, 3] = -4.0
    assert complexity(one_hot) == 0.0
    assert complexity(np.array([[0.5, 0.25, 0.25]])) == pytest.approx(1.0397207708399179, abs=1e-12)
    with pytest.raises(DegenerateAttribution):
        complexity(np.zeros((1, 4)))


def test_complexity_is_scale_and_sign_invariant():
    a = np.random.default_rng(1).normal(size=(3, 9))
    assert complexity(a) == pytest.approx(complexity(-7.5 * a), abs=1e-12)


def test_reliability_examples():
    a = np.array([[0.9, 0.8, 0.1, 0.05]])
    assert relevance_rank_acc(a, [[1, 0, 1, 0]]) == 0.5
    assert relevance_rank_acc(a, [[1, 1, 0, 0]]) == 1.0
    assert relevance_rank_acc(a, [[0, 0, 1, 1]]) == 0.0
    assert relevance_mass_acc(np.array([[0.6, 0.3, 0.1]]), [[1, 0, 0]]) == pytest.approx(0.6)
    assert relevance_mass_acc(np.ones((2, 4)), [[1, 1, 1, 1], [0, 0, 0, 0]]) == 0.5
    assert relevance_mass_acc(a, [[1, 1, 1, 1]]) == 1.0
    with pytest.raises(MaskInfeasible):
        relevance_rank_acc(a, np.zeros((1, 4)))
    with pytest.raises(DegenerateAttribution):
        relevance_mass_acc(np.zeros((1, 4)), [[1, 0, 0, 0]])


def test_oracle_attribution_is_perfect_on_every_dataset(small_catalog):
    for ds in small_catalog:
        for mask in ds.mask_test:
            assert relevance_rank_acc(mask.astype(float), mask) == 1.0
            assert relevance_mass_acc(mask.astype(float), mask) == 1.0


def test_random_racc_is_chance_level():
    rng = np.random.default_rng(0)
    mask = np.zeros((1, 50), dtype=bool)
    mask[0, 20:36] = True
    values = np.array([relevance_rank_acc(rng.random((1, 50)), mask) for _ in range(10_000)])
    se = values.std(ddof=1) / np.sqrt(len(values))
    assert abs(values.mean() - 16 / 50) < 3 * se


# ------------------------------------------------------------------ faithfulness

def test_faithfulness_exact_linear_attribution():
    rng = np.random.default_rng(2)
    for seed in range(10):
        w, x, ref = rng.normal(size=(3, 10)), rng.normal(size=(3, 10)), rng.normal(size=(3, 10))
        model = LinearScorer(w, 100.0)  # keeps class 1 as the explained prediction
        params = FaithfulnessParams(seed=seed, readout="logit")
        r = faithfulness_corr(model, w * (x - ref), x, params, baseline=ref)
        assert abs(r - 1.0) < 1e-9


def faithfulness_null(n_runs, shape=(50, 50), n_seeds=100):
    """Correlations of model-independent random attributions on a random linear scorer."""
    rng = np.random.default_rng(3)
    model = LinearScorer(rng.normal(size=shape))
    x = rng.normal(size=shape)
    return np.array([
        faithfulness_corr(model, np.random.default_rng(1000 + s).normal(size=shape), x,
                          FaithfulnessParams("Uniform", n_runs=n_runs, seed=s))
        for s in range(n_seeds)])


def test_faithfulness_null_for_unrelated_attributions():
    # with 20 runs a single correlation is noisy, but it is centred on zero
    assert abs(faithfulness_null(20).mean()) < 0.1
    # enough runs on a full-size input bring each |correlation| near zero
    assert np.abs(faithfulness_null(200)).mean() < 0.1


def test_faithfulness_degenerate_cases():
    model = LinearScorer(np.zeros((1, 10)), 0.5)
    with pytest.raises(DegenerateCorrelation):
        faithfulness_corr(model, np.arange(10.0)[None], np.ones((1, 10)), FaithfulnessParams("Uniform"))
    live = LinearScorer(np.ones((1, 10)))
    with pytest.raises(DegenerateCorrelation):
        faithfulness_corr(live, np.ones((1, 10)), np.ones((1, 10)), FaithfulnessParams("Uniform"))


def test_faithfulness_parameters_and_baselines():
    with pytest.raises(InvalidParameter):
        FaithfulnessParams(subset_fraction=1.0)
    with pytest.raises(InvalidParameter):
        FaithfulnessParams(n_runs=1)
    rng = np.random.default_rng(0)
    u = draw_baseline("Uniform", (2, 5), rng, feature_range=([0, 10], [1, 20]))
    assert np.all((u[0] >= 0) & (u[0] <= 1)) and np.all((u[1] >= 10) & (u[1] <= 20))
    np.testing.assert_array_equal(draw_baseline("TrainMean", (2, 3), rng, train_mean=[[1], [2]]),
                                  [[1, 1, 1], [2, 2, 2]])
    with pytest.raises(InvalidParameter):
        draw_baseline("GenerationProcess", (1, 5), rng)


def test_generation_process_baseline(gaussian_middle):
    ds = gaussian_middle
    base = draw_baseline("GenerationProcess", ds.shape, np.random.default_rng(0),
                         generation_spec=ds.generation_spec, normalization=ds.normalization)
    assert base.shape == ds.shape and np.all(np.isfinite(base))


# -------------------------------------------------------------------- robustness

def _constant(model, x, target):
    return np.ones_like(x)


def _identity(model, x, target):
    return np.array(x, copy=True)


def test_constant_explainer_has_zero_sensitivity(linear_model):
    x = np.random.default_rng(0).normal(size=(2, 6))
    for seed in range(5):
        params = RobustnessParams(radius=0.5, seed=seed)
        assert sens_max(_constant, linear_model, x, params) == 0.0
        assert sens_mean(_constant, linear_model, x, params) == 0.0


def test_zero_radius_gives_zero(linear_model):
    x = np.random.default_rng(0).normal(size=(2, 6))
    assert sens_max(_identity, linear_model, x, RobustnessParams(radius=0.0)) == 0.0


@pytest.mark.parametrize("norm", ["L2", "Linf"])
def test_identity_explainer_matches_norm_oracle(linear_model, norm):
    x = np.random.default_rng(1).normal(size=(2, 6))
    for seed in range(20):
        params = RobustnessParams(radius=0.3, n_perturbations=7, seed=seed, norm=norm)
        rng = make_rng(seed, "sensitivity")
        radii = []
        for _ in range(7):
            rng.uniform(-1.0, 1.0, size=x.shape)
            radii.append(0.3 * rng.uniform(0.0, 1.0))
        assert abs(sens_max(_identity, linear_model, x, params) - max(radii)) < 1e-12
        assert abs(sens_mean(_identity, linear_model, x, params) - np.mean(radii)) < 1e-12
        assert max(radii) <= 0.3


def test_sens_mean_never_exceeds_sens_max(linear_model):
    rng = np.random.default_rng(4)

    def tanh_expl(model, x, target):
        return np.tanh(3 * x) * model.params["weight"].data

    for seed in range(50):
        x = rng.normal(size=(2, 6))
        res = sensitivity(tanh_expl, linear_model, x, RobustnessParams(radius=rng.uniform(0, 1), seed=seed))
        assert res.mean <= res.max
        assert 0.0 <= res.stable_fraction <= 1.0


def test_single_perturbation_mean_equals_max(linear_model):
    x = np.random.default_rng(5).normal(size=(2, 6))
    params = RobustnessParams(n_perturbations=1, seed=3)
    assert sens_mean(_identity, linear_model, x, params) == sens_max(_identity, linear_model, x, params)


def test_perturbations_stay_in_ball():
    x = np.zeros((3, 4))
    for norm in ("L2", "Linf"):
        d = perturbations(x, RobustnessParams(radius=0.2, n_perturbations=50, norm=norm))
        sizes = [np.abs(v).max() if norm == "Linf" else np.linalg.norm(v) for v in d]
        assert max(sizes) <= 0.2 + 1e-15


def test_explainer_failure_carries_sample_index(linear_model):
    calls = []

    def flaky(model, x, target):
        calls.append(1)
        if len(calls) == 4:
            raise RuntimeError("boom")
        return x

    with pytest.raises(ExplainerFailure, match="sample 2"):
        sensitivity(flaky, linear_model, np.zeros((2, 6)))


def test_robustness_parameter_validation():
    with pytest.raises(InvalidParameter):
        RobustnessParams(radius=-1)
    with pytest.raises(InvalidParameter):
        RobustnessParams(norm="L1")


def test_metric_names():
    assert resolve_metric("Relevance_Rank") == "racc"
    assert resolve_metric("max_sensitivity") == "sens_max"
    with pytest.raises(KeyError):
        resolve_metric("auc")
