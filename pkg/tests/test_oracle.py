import numpy as np
import pytest

from stkr import oracle as O
from stkr.transform import PolyTransform, inverse_laplacian

from conftest import psd_gram, psd_weights


def test_identity_transform_roundtrip():
    G = psd_gram(0, 40, 10).toarray()
    assert np.abs(O.transformed_gram(G, PolyTransform((1.0,))) - G).max() <= 1e-9 * np.abs(G).max()


def test_square_transform_is_matrix_power():
    G = psd_gram(1, 40, 10).toarray()
    ref = G @ G / 40
    assert np.abs(O.transformed_gram(G, PolyTransform.monomial(2)) - ref).max() <= 1e-9 * np.abs(ref).max()


@pytest.mark.parametrize("seed", range(5))
def test_spectral_calculus_consistency(seed):
    N = 30 + 40 * seed
    G = psd_gram(seed, N, 5).toarray()
    t = PolyTransform((0.1, 0.2, 0.3, 0.4))
    ref = sum(t.pi(p) * np.linalg.matrix_power(G, p) / N ** (p - 1) for p in range(1, 5))
    assert np.abs(O.transformed_gram(G, t) - ref).max() <= 1e-9 * np.abs(ref).max()


def test_oracle_predict_matches_gram_rows():
    G = psd_gram(2, 50, 12)
    for t in (PolyTransform((0.3, 0.7)), inverse_laplacian(0.9)):
        o = O.dense_stkr_oracle(G, t, 0.1, np.arange(12.0))
        ref = o.gram_s[:, :12] @ o.alpha
        assert np.allclose(o.predict(G.toarray()), ref, atol=1e-9 * np.abs(ref).max())


def test_oracle_size_limit():
    with pytest.raises(ValueError):
        O.dense_stkr_oracle(np.zeros((2001, 2001)), PolyTransform((1.0,)), 0.1, np.ones(1), n=1)


def test_synthetic_kernel_orthonormal():
    sk = O.make_synthetic_kernel(N=500, k=10, seed=3)
    assert np.abs(sk.psi.T @ sk.psi / 500 - np.eye(10)).max() <= 1e-10
    K2 = sk.power(2)
    assert np.allclose(K2, sk.gram() @ sk.gram() / 500)


def test_decay_decreases():
    sk = O.make_synthetic_kernel(N=1000, seed=0)
    table = O.approximation_decay(sk, [50, 200, 800], p=2, trials=20, seed=1)
    assert np.all(np.diff(table.mean) < 0)
    assert table.monotone_fraction(group=10) >= 0.9
    assert table.to_text().startswith("size\tdeviation\n50\t")


def test_decay_rank_one_driven_by_top_eigenvalue():
    sk = O.make_synthetic_kernel(N=300, eigvals=[0.7], seed=2)
    table = O.approximation_decay(sk, [300], p=2, trials=3, seed=0, n_queries=20)
    K = sk.gram()
    rng = O._trial_rng(0, 0)
    q = rng.choice(300, size=20, replace=False)
    idx = rng.integers(0, 300, size=300)
    lam_hat = np.linalg.eigvalsh(K[np.ix_(idx, idx)] / 300)[-1]
    # rank-1: K2_hat = (lam_hat / lam) * K2 on query x sample pairs
    K2 = sk.power(2)[np.ix_(q, idx)]
    assert table.deviations[0, 0] == pytest.approx(abs(lam_hat / 0.7 - 1) * np.abs(K2).max())


def test_concentration_rank_one_never_exceeds():
    sk = O.make_synthetic_kernel(N=400, eigvals=[0.5], seed=4)
    K = sk.gram()
    for tr in range(20):
        idx = O._trial_rng(0, tr).choice(400, size=100, replace=False)
        top = np.linalg.eigvalsh(K[np.ix_(idx, idx)] / 100)[-1]
        # distinct points of a rank-1 kernel: Rayleigh quotient bounded by lam_1 psi_max^2 mean
        assert top <= 0.5 * np.max(sk.psi ** 2)
    assert O.eigenvalue_concentration(sk, 100, trials=20, delta=0.05) == 1.0


def test_concentration_full_sample_close():
    sk = O.make_synthetic_kernel(N=600, seed=5)
    lam = np.linalg.eigvalsh(sk.gram() / 600)[-1]
    assert lam == pytest.approx(sk.eigvals[0], rel=1e-10)


def test_identity_eta_zero_and_k4():
    W = psd_weights(3, 10)
    assert O.laplacian_identity_check(W, 0.0, trials=10) <= 1e-10
    assert O.laplacian_identity_check(np.ones((4, 4)), 0.5, trials=20) <= 1e-8
    assert O.laplacian_identity_check(psd_weights(4, 10), 0.9, trials=20) <= 1e-8


def test_identity_preconditions():
    with pytest.raises(ValueError):
        O.laplacian_identity_check(np.diag([1.0, 0.0]), 0.5)
    with pytest.raises(ValueError):
        O.laplacian_identity_check(np.array([[0.0, -1.0], [-1.0, 0.0]]), 0.5)
