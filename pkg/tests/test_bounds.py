import numpy as np
import pytest

from gated_mkl import arrangements as arr
from gated_mkl import bounds as B
from gated_mkl.solvers import group_lasso_fista, group_lasso_objective


def test_lambda_formula():
    X = np.arange(6.0).reshape(3, 2)
    assert B.bound_lambda(2.0, 0.5, X) == pytest.approx(2 * 0.5 * np.sqrt(55) / 3)
    with pytest.raises(ValueError):
        B.bound_lambda(0.0, 1.0, X)


def test_prediction_error():
    assert B.prediction_error([1.0, 2.0], [1.0, 0.0]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        B.prediction_error([1.0], [1.0, 2.0])


def test_harness_solves_the_unhalved_problem():
    # (1/2n)||r||^2 + (lam/2) sum||w|| is half of (1/n)||r||^2 + lam sum||w||, so both share minimisers
    rng = np.random.default_rng(0)
    X = rng.standard_normal((10, 2))
    y = rng.standard_normal(10)
    masks = arr.sample_arrangements(X, 6, 2000, seed=0)
    lam = 0.3
    W, _ = group_lasso_fista(X, masks, lam / 2, y, loss_scale=1 / 10, tol=1e-12)
    full = 2 * group_lasso_objective(X, masks, W, lam / 2, y, loss_scale=1 / 10)
    for _ in range(20):
        P = W + 1e-3 * rng.standard_normal(W.shape)
        assert 2 * group_lasso_objective(X, masks, P, lam / 2, y, loss_scale=1 / 10) >= full - 1e-12


def test_sigma_zero_recovers_planted_outputs():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((12, 3))
    masks = arr.sample_arrangements(X, 20, 5000, seed=0)
    planted = B.make_planted_model(masks, 3, 2, sigma=0.0, seed=0)
    rep = B.bound_coverage(planted, masks, X, t=4.0, trials=2)
    assert rep.lam == B.SIGMA_ZERO_LAMBDA
    assert rep.violations == 0
    assert rep.max_error < 1e-6


def test_coverage_report_fields():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((15, 3))
    masks = arr.sample_arrangements(X, 30, 5000, seed=0)
    planted = B.make_planted_model(masks, 3, 2, sigma=0.3, seed=1)
    rep = B.bound_coverage(planted, masks, X, t=6.0, trials=5, seed=3)
    d = rep.to_dict()
    assert set(d) >= {"t", "lam", "trials", "violations", "ceiling", "bound", "rate", "allowed"}
    assert all(type(v) in (int, float) for v in d.values())
    assert rep.violations <= rep.trials


def test_gaussian_tail_bound_holds():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((20, 3))
    sigma = 0.7
    scale = sigma * np.linalg.norm(X, "fro")
    rows = B.gaussian_norm_tail(X, sigma, scale * np.array([0.5, 1.0, 2.0, 3.0]), draws=20_000, seed=1)
    for _, emp, bound in rows:
        assert emp <= bound + 3 * np.sqrt(0.25 / 20_000)
