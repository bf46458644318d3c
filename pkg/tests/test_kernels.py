import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gated_mkl import arrangements as arr
from gated_mkl import kernels as K

from conftest import naive_ntk, naive_weighted_kernel, random_instance


def test_masking_kernel_entrywise():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((5, 3))
    D = np.array([1, 0, 1, 1, 0], dtype=bool)
    M = K.masking_kernel(X, D)
    for i in range(5):
        for j in range(5):
            assert M[i, j] == pytest.approx(D[i] * D[j] * X[i] @ X[j], abs=1e-14)


def test_weighted_kernel_matches_naive_sum():
    X, _, masks = random_instance(1, n=9, d=3, p=15)
    eta = np.random.default_rng(2).uniform(0, 1, masks.p)
    assert np.allclose(K.weighted_kernel(X, masks, eta), naive_weighted_kernel(X, masks, eta), atol=1e-12)


def test_weighted_kernel_rejects_negative_weights():
    X, _, masks = random_instance(1, n=5, d=2, p=4)
    with pytest.raises(ValueError):
        K.weighted_kernel(X, masks, -np.ones(masks.p))


def test_ntk_closed_form_entrywise():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((7, 4))
    assert np.allclose(K.ntk_matrix(X), naive_ntk(X), atol=1e-14)
    assert K.ntk_value(X[0], X[0]) == pytest.approx(0.5 * X[0] @ X[0])
    assert K.ntk_value(X[0], -X[0]) == pytest.approx(0.0, abs=1e-15)
    assert K.ntk_value(X[0], np.zeros(4)) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 10), st.integers(1, 5), st.integers(0, 10_000))
def test_ntk_symmetric_psd(n, d, seed):
    X = np.random.default_rng(seed).standard_normal((n, d))
    H = K.ntk_matrix(X)
    assert np.array_equal(H, H.T)
    assert K.is_psd(H)


def test_ntk_cosine_clamped_for_parallel_rows():
    x = np.array([1e8, 3e8])
    H = K.ntk_matrix(np.vstack([x, 2 * x]))
    assert np.all(np.isfinite(H))
    assert H[0, 1] == pytest.approx(x @ (2 * x) / 2)


def test_ntk_equals_exact_mixture_2d():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((6, 2))
    masks, eta = arr.exact_weights_2d(X)
    assert np.max(np.abs(K.weighted_kernel(X, masks, eta) - K.ntk_matrix(X))) < 1e-12


def test_krr_matches_direct_solve():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((8, 3))
    y = rng.standard_normal(8)
    H = K.ntk_matrix(X)
    train, test = K.krr_fit_predict(H, 0.3, y, K.ntk_cross(X[:3], X))
    alpha = np.linalg.solve(H + 0.3 * np.eye(8), y)
    assert np.allclose(train, H @ alpha)
    assert np.allclose(test, H[:3] @ alpha)
    with pytest.raises(ValueError):
        K.krr_fit_predict(H, 0.0, y)


def test_spd_solve_jitters_singular_matrix():
    A = np.ones((3, 3))
    x = K.spd_solve(A, np.ones(3))
    assert np.all(np.isfinite(x))


def test_check_kernel_rejects_asymmetric():
    with pytest.raises(ValueError):
        K.check_kernel(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_kernel_binary_and_csv_round_trip(tmp_path):
    H = K.ntk_matrix(np.random.default_rng(0).standard_normal((4, 3)))
    p = tmp_path / "k.bin"
    K.save_kernel(p, H)
    raw = p.read_bytes()
    assert raw[:4] == b"GMKK" and int.from_bytes(raw[4:12], "little") == 4
    assert np.array_equal(K.load_kernel(p), H)
    K.save_kernel_csv(tmp_path / "k.csv", H)
    assert np.array_equal(np.loadtxt(tmp_path / "k.csv", delimiter=","), H)
    with pytest.raises(ValueError):
        K.kernel_from_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        K.kernel_from_bytes(raw[:-8])


def test_finite_width_variants_approach_closed_form():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((4, 3))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    H = K.ntk_matrix(X)
    for variant in ("gated", "reparam"):
        F = K.finite_width_ntk(X, 20_000, variant, seed=1)
        assert np.max(np.abs(F - H)) < 5 / np.sqrt(20_000)


def test_mkl_objective_against_formula():
    X, y, masks = random_instance(2, n=6, d=2, p=5)
    eta = np.full(masks.p, 1 / masks.p)
    Km = naive_weighted_kernel(X, masks, eta)
    assert K.mkl_objective(masks, X, eta, 0.2, y) == pytest.approx(y @ np.linalg.solve(Km + 0.2 * np.eye(6), y))
