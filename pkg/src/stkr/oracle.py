"""Dense ground truth and empirical checks on synthetic kernels.

Everything here is O(N^3) and meant for N up to a few thousand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .kernel import SparseGram
from .transform import Transform, linear_coefficient, spectral_values, tail_values


def _dense(G) -> np.ndarray:
    if isinstance(G, SparseGram):
        return G.toarray()
    if sp.issparse(G):
        return G.toarray()
    return np.asarray(G, dtype=np.float64)


@dataclass(frozen=True)
class OracleSolution:
    alpha: np.ndarray
    gram_s: np.ndarray
    predict: Callable[[np.ndarray], np.ndarray]


def transformed_gram(G, t: Transform) -> np.ndarray:
    """``N * U diag(s(lam)) U^T`` for the eigendecomposition of ``G / N``."""
    G = _dense(G)
    N = G.shape[0]
    lam, U = np.linalg.eigh(0.5 * (G + G.T) / N)
    return N * (U * spectral_values(t, lam)) @ U.T


def dense_stkr_oracle(G, t: Transform, beta: float, Y, n: int | None = None) -> OracleSolution:
    """Closed-form STKR by explicit spectral calculus.

    ``predict`` takes base-kernel rows ``v_K(x)`` (one query per row) and
    evaluates ``v_{K_s,n}(x)^T alpha``, where the transformed kernel row is
    ``pi_1 v_K(x)[:n] + v_K(x)^T H G[:, :n] / N`` and ``H = U h(lam) U^T``
    carries the multi-hop part of ``s``.  On visible samples this equals
    the corresponding rows of ``gram_s``.
    """
    if isinstance(G, SparseGram) and n is None:
        n = G.n
    G = _dense(G)
    if n is None:
        raise ValueError("number of labeled samples is required")
    N = G.shape[0]
    if N > 2000:
        raise ValueError("dense oracle limited to 2000 samples")
    Y = np.asarray(Y, dtype=np.float64)
    squeeze = Y.ndim == 1
    Y2 = Y[:, None] if squeeze else Y
    lam, U = np.linalg.eigh(0.5 * (G + G.T) / N)
    gram_s = N * (U * spectral_values(t, lam)) @ U.T
    alpha = np.linalg.solve(gram_s[:n, :n] + n * beta * np.eye(n), Y2)
    pi1 = linear_coefficient(t)
    tail = (U * tail_values(t, lam)) @ U.T
    z = tail @ (G[:, :n] @ alpha) / N

    def predict(rows):
        R = _dense(rows)
        single = R.ndim == 1
        R = np.atleast_2d(R)
        out = pi1 * (R[:, :n] @ alpha) + R @ z
        out = out[:, 0] if squeeze else out
        return out[0] if single else out

    return OracleSolution(alpha[:, 0] if squeeze else alpha, gram_s, predict)


def krr_closed_form(G, Y, beta: float, n: int) -> np.ndarray:
    """Plain kernel ridge coefficients ``(G_n + n beta I)^-1 y``."""
    G = _dense(G)
    return np.linalg.solve(G[:n, :n] + n * beta * np.eye(n), np.asarray(Y, dtype=np.float64))


# --------------------------------------------------------------------------
# synthetic kernels


@dataclass(frozen=True)
class SyntheticKernel:
    """Kernel on ``{0..N-1}`` with uniform marginal and a known spectrum.

    ``psi`` has shape ``(N, k)`` with ``psi.T @ psi / N = I``.
    """

    psi: np.ndarray
    eigvals: np.ndarray

    @property
    def size(self) -> int:
        return self.psi.shape[0]

    def power(self, p: int) -> np.ndarray:
        return (self.psi * self.eigvals ** p) @ self.psi.T

    def gram(self) -> np.ndarray:
        return self.power(1)

    @property
    def kappa2(self) -> float:
        return float(np.max(np.einsum("ik,k,ik->i", self.psi, self.eigvals, self.psi)))


def make_synthetic_kernel(N: int = 2000, eigvals=None, k: int = 20, seed: int = 0) -> SyntheticKernel:
    """Random orthonormal eigenfunctions from a seeded Gaussian QR.

    The default spectrum is ``0.8^(i-1)`` for ``i = 1..k``.
    """
    if eigvals is None:
        eigvals = 0.8 ** np.arange(k)
    eigvals = np.sort(np.asarray(eigvals, dtype=np.float64))[::-1]
    if np.any(eigvals < 0):
        raise ValueError("eigenvalues must be nonnegative")
    k = len(eigvals)
    if k > N:
        raise ValueError("more eigenfunctions than points")
    rng = np.random.Generator(np.random.Philox(seed))
    q, r = np.linalg.qr(rng.standard_normal((N, k)))
    q *= np.sign(np.diag(r))
    return SyntheticKernel(q * np.sqrt(N), eigvals)


def _trial_rng(seed, trial):
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, trial]))


@dataclass(frozen=True)
class DecayTable:
    sizes: tuple
    deviations: np.ndarray  # (trials, len(sizes))

    @property
    def mean(self) -> np.ndarray:
        return self.deviations.mean(axis=0)

    def monotone_fraction(self, group: int = 1) -> float:
        """Share of trial averages that strictly decrease with size.

        Consecutive blocks of ``group`` trials are averaged first; a
        trailing partial block is dropped.
        """
        k = self.deviations.shape[0] // group
        if k == 0:
            raise ValueError("fewer trials than the group size")
        avg = self.deviations[: k * group].reshape(k, group, -1).mean(axis=1)
        return float(np.mean(np.all(np.diff(avg, axis=1) < 0, axis=1)))

    def loglog_slope(self) -> float:
        return float(np.polyfit(np.log(self.sizes), np.log(self.mean), 1)[0])

    def to_text(self) -> str:
        lines = ["size\tdeviation"]
        lines += [f"{s}\t{d:.6e}" for s, d in zip(self.sizes, self.mean)]
        return "\n".join(lines) + "\n"


def approximation_decay(sk: SyntheticKernel, sample_sizes, p: int = 2, trials: int = 20,
                        seed: int = 0, n_queries: int = 100) -> DecayTable:
    """Max deviation of the sample estimate of ``K^p`` from the exact ``K^p``.

    Each trial draws i.i.d. uniform samples plus distinct held-out query
    points and measures ``max |K^p_hat(x, x_j) - K^p(x, x_j)|`` over queries
    ``x`` and samples ``x_j``.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    sizes = tuple(int(s) for s in sample_sizes)
    if max(sizes) > sk.size:
        raise ValueError("sample size exceeds the input space")
    K = sk.gram()
    Kp = sk.power(p)
    dev = np.empty((trials, len(sizes)))
    for tr in range(trials):
        rng = _trial_rng(seed, tr)
        queries = rng.choice(sk.size, size=n_queries, replace=False)
        for c, s in enumerate(sizes):
            idx = rng.integers(0, sk.size, size=s)
            Gs = K[np.ix_(idx, idx)]
            est = K[np.ix_(queries, idx)]
            for _ in range(p - 1):
                est = est @ Gs / s
            dev[tr, c] = np.max(np.abs(est - Kp[np.ix_(queries, idx)]))
    return DecayTable(sizes, dev)


def concentration_bound(sk: SyntheticKernel, sample_size: int, delta: float) -> float:
    N = sample_size
    return sk.eigvals[0] + sk.kappa2 / np.sqrt(N) * (
        2 * np.sqrt(2) + np.sqrt(19 * np.log(2 * (N + 1) / delta)))


def eigenvalue_concentration(sk: SyntheticKernel, sample_size: int, trials: int = 100,
                             delta: float = 0.05, seed: int = 0) -> float:
    """Fraction of trials where the top sample eigenvalue obeys the bound."""
    K = sk.gram()
    bound = concentration_bound(sk, sample_size, delta)
    hits = 0
    for tr in range(trials):
        idx = _trial_rng(seed, tr).integers(0, sk.size, size=sample_size)
        top = np.linalg.eigvalsh(K[np.ix_(idx, idx)] / sample_size)[-1]
        hits += top <= bound
    return hits / trials


# --------------------------------------------------------------------------
# transductive / inductive identity for the inverse Laplacian


def _psd_sqrt(A):
    lam, U = np.linalg.eigh(0.5 * (A + A.T))
    return (U * np.sqrt(np.clip(lam, 0, None))) @ U.T


def laplacian_identity_check(W, eta: float, trials: int = 20, seed: int = 0) -> float:
    """Max relative gap between ``y^T L y`` and ``||f||_H^2 - eta ||f||_P^2``.

    The RKHS norm is computed independently of the identity, from the
    eigen-expansion of the integral operator of ``K`` under ``P``.
    """
    W = _dense(W)
    if np.any(W < 0) or not np.allclose(W, W.T):
        raise ValueError("W must be symmetric and nonnegative")
    d = W.sum(axis=1)
    if np.any(d <= 0):
        raise ValueError("every node needs a positive degree")
    tr = d.sum()
    S = W / np.sqrt(np.outer(d, d))
    S_half = _psd_sqrt(S)
    L = np.eye(len(d)) - eta * S
    p = d / tr
    GK = tr * W / np.outer(d, d)
    lam, phi = np.linalg.eigh(np.sqrt(np.outer(p, p)) * GK)
    keep = lam > 1e-10 * lam.max()
    psi = phi[:, keep] / np.sqrt(p)[:, None]
    lam = lam[keep]
    rng = np.random.Generator(np.random.Philox(seed))
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(len(d))
        y = S_half @ u
        f = np.sqrt(tr) * (S_half @ y) / np.sqrt(d)
        coef = psi.T @ (p * f)
        rhs = np.sum(coef ** 2 / lam) - eta * np.sum(p * f ** 2)
        lhs = y @ L @ y
        scale = max(abs(lhs), abs(rhs), np.finfo(float).tiny)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst
