"""Training-scale checks. Deselected by default; run with `pytest -m slow`."""
import numpy as np
import pytest
from scipy.integrate import trapezoid

from catvae.ml.benchmarks import toy_bayes_net
from catvae.ml.cramer_wold import cw_distance, cw_distance_mc
from catvae.ml.data import CategoricalDataset, split
from catvae.ml.metrics import adversarial_accuracy_score, kl_marginal, pcd
from catvae.ml.prior import fit_gmm, fit_kde, prior_logpdf
from catvae.ml.synthesis import generate
from catvae.ml.trainer import aggregate_posterior_sample, train_step1
from catvae.schemas.config import CwConfig, Step1Config
from tests.conftest import make_schema

pytestmark = pytest.mark.slow


def cw_cases(count: int = 50, seed: int = 0):
    rng = np.random.default_rng(seed)
    for case in range(count):
        p = int(rng.choice([2, 20, 231, 400]))
        n, m = rng.integers(10, 201, size=2)
        X = rng.normal(size=(n, p))
        Y = rng.normal(scale=rng.uniform(1.5, 3.0), size=(m, p)) + rng.normal(scale=0.5, size=p)
        yield case, X, Y


@pytest.mark.parametrize("case, X, Y", list(cw_cases()))
def test_closed_form_matches_slicing_oracle(case, X, Y) -> None:
    p = X.shape[1]
    mode = "exact_series" if p < 200 else "asymptotic"
    closed = cw_distance(X, Y, CwConfig(kernel_mode=mode))
    sliced = cw_distance_mc(X, Y, CwConfig(mc_projections=10_000, seed=case))
    assert sliced == pytest.approx(closed, rel=0.02)


def test_survey_width_clouds() -> None:
    rng = np.random.default_rng(1)
    X, Y = rng.normal(size=(100, 231)), rng.normal(scale=2.0, size=(100, 231))
    assert cw_distance_mc(X, Y, CwConfig(mc_projections=10_000)) == pytest.approx(cw_distance(X, Y), rel=0.02)


def toy_config(**overrides) -> Step1Config:
    base = dict(latent_dim=2, hidden_sizes=[64, 64], epochs=30, batch_size=256, learning_rate=3e-3)
    base.update(overrides)
    return Step1Config(**base)


def test_entropy_term_keeps_posterior_variance_open() -> None:
    data = toy_bayes_net(5000, seed=0)
    on, off = [], []
    for seed in range(3):
        _, with_reg = train_step1(data, None, toy_config(seed=seed))
        _, without = train_step1(data, None, toy_config(seed=seed, use_entropy_reg=False))
        on.append(np.mean(with_reg.avg_posterior_variance))
        off.append(np.mean(without.avg_posterior_variance))
    assert np.mean(on) >= 10 * np.mean(off)


def _fit_and_generate(train: CategoricalDataset, cfg: Step1Config, seed: int) -> CategoricalDataset:
    model, _ = train_step1(train, None, cfg)
    prior = fit_gmm(aggregate_posterior_sample(model, train, seed=seed), components=10, seed=seed)
    return generate(model, prior, train.n, seed=seed)


def test_ablation_trends_on_toy_benchmark() -> None:
    pcd_cw, pcd_plain, kl_on, kl_off = [], [], [], []
    for seed in range(5):
        train, _ = split(toy_bayes_net(2500, seed=seed), 0.2, seed)
        plain = _fit_and_generate(train, toy_config(seed=seed, epochs=20), seed)
        with_cw = _fit_and_generate(train, toy_config(seed=seed, epochs=20, lambda_cw=100.0), seed)
        no_reg = _fit_and_generate(train, toy_config(seed=seed, epochs=20, use_entropy_reg=False), seed)
        pcd_plain.append(pcd(train, plain))
        pcd_cw.append(pcd(train, with_cw))
        kl_on.append(kl_marginal(train, plain))
        kl_off.append(kl_marginal(train, no_reg))
    assert np.mean(pcd_cw) <= np.mean(pcd_plain)
    assert np.mean(kl_on) <= np.mean(kl_off)


@pytest.mark.parametrize("seed", range(5))
def test_adversarial_accuracy_calibration(seed) -> None:
    # wide binary rows keep nearest-neighbour Hamming ties rare
    rng = np.random.default_rng(seed)
    source = CategoricalDataset(make_schema(*[2] * 1024), rng.integers(0, 2, size=(10_000, 1024)))
    order = rng.permutation(source.n)
    train, synth = source.subset(order[:5000]), source.subset(order[5000:])
    assert abs(adversarial_accuracy_score(train, synth, seed) - 0.5) <= 0.05


def test_kde_integrates_to_one_in_two_dimensions() -> None:
    model = fit_kde(np.random.default_rng(2).normal(size=(40, 2)))
    axis = np.linspace(-8, 8, 801)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    density = np.exp(prior_logpdf(model, np.column_stack([gx.ravel(), gy.ravel()]))).reshape(gx.shape)
    assert trapezoid(trapezoid(density, axis, axis=1), axis) == pytest.approx(1.0, abs=1e-3)


def test_em_monotone_over_random_runs() -> None:
    for run in range(20):
        rng = np.random.default_rng(run)
        k = int(rng.integers(2, 8))
        centers = rng.normal(scale=4.0, size=(k, 2))
        z = centers[rng.integers(0, k, size=500)] + rng.normal(size=(500, 2))
        trace = fit_gmm(z, components=k, seed=run, tol=1e-10).log_likelihood_trace
        assert all(b >= a - 1e-9 for a, b in zip(trace, trace[1:])), run
