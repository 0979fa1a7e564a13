"""Kernel PCA on the unlabeled Gram block plus a ridge linear probe."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 4000
REL_EIG_FLOOR = 1e-10


class RankError(ValueError):
    """The unlabeled Gram has fewer than ``d`` admissible eigenvalues."""


@dataclass(frozen=True)
class KpcaModel:
    """Top-``d`` eigenpairs of ``G_m / m``.

    ``vectors[:, i]`` satisfies ``G_m v_i = m lam_i v_i`` and
    ``||v_i||^2 = 1 / (m lam_i)``, so the feature maps are orthonormal in
    the RKHS.  ``weights`` stays ``None`` until a probe is fitted.
    """

    eigvals: np.ndarray
    vectors: np.ndarray
    weights: np.ndarray | None = None
    beta: float | None = None

    @property
    def d(self) -> int:
        return len(self.eigvals)

    @property
    def m(self) -> int:
        return self.vectors.shape[0]


def _top_eigh(G, d):
    m = G.shape[0]
    if m <= DENSE_LIMIT or d >= m - 1:
        A = G.toarray() if sp.issparse(G) else np.asarray(G, dtype=np.float64)
        lam, U = sla.eigh(0.5 * (A + A.T), subset_by_index=[m - d, m - 1])
    else:
        v0 = np.random.Generator(np.random.Philox(0)).standard_normal(m)
        lam, U = spla.eigsh(G, k=d, which="LA", v0=v0, tol=1e-12)
    order = np.argsort(lam)[::-1]
    return lam[order], U[:, order]


def fit_kpca(G_m, d: int) -> KpcaModel:
    """Leading ``d`` eigenpairs of the unlabeled Gram ``G_m``.

    Eigenvalues under ``1e-10`` times the largest are treated as zero.
    """
    m = G_m.shape[0]
    if G_m.shape != (m, m):
        raise ValueError(f"Gram must be square, got {G_m.shape}")
    if d < 1:
        raise ValueError(f"d must be positive, got {d}")
    if d > m:
        raise RankError(f"d={d} exceeds the number of unlabeled samples m={m}")
    lam, U = _top_eigh(G_m, d)
    lam = lam / m
    if lam[0] <= 0:
        raise RankError("unlabeled Gram has no positive eigenvalue")
    ok = lam > REL_EIG_FLOOR * lam[0]
    if ok[:d].sum() < d:
        raise RankError(f"unlabeled Gram has rank {int(ok.sum())} < d={d}")
    lam, U = lam[:d], U[:, :d]
    return KpcaModel(lam, U / np.sqrt(m * lam))


def truncate(model: KpcaModel, d: int) -> KpcaModel:
    """Keep the leading ``d`` eigenpairs (drops any fitted probe)."""
    if not 1 <= d <= model.d:
        raise RankError(f"cannot truncate {model.d} components to d={d}")
    return KpcaModel(model.eigvals[:d], model.vectors[:, :d])


def features(model: KpcaModel, rows) -> np.ndarray:
    """``Psi(x)[i] = v_i^T row`` for kernel rows restricted to unlabeled samples."""
    single = not sp.issparse(rows) and np.ndim(rows) == 1
    R = rows if sp.issparse(rows) else np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if R.shape[1] != model.m:
        raise ValueError(f"rows must have length m={model.m}, got {R.shape[1]}")
    out = np.asarray(R @ model.vectors)
    return out[0] if single else out


def fit_probe(model: KpcaModel, train_features, Y, beta: float) -> KpcaModel:
    """Ridge weights ``(Psi Psi^T + n beta I)^-1 Psi y`` with no bias.

    ``train_features`` has one row per labeled sample (shape ``(n, d)``).
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    F = np.atleast_2d(np.asarray(train_features, dtype=np.float64))
    Y = np.asarray(Y, dtype=np.float64)
    if F.shape[1] != model.d:
        raise ValueError(f"features must have {model.d} columns, got {F.shape[1]}")
    if Y.shape[0] != F.shape[0]:
        raise ValueError("labels and features disagree on the number of samples")
    n = F.shape[0]
    w = sla.solve(F.T @ F + n * beta * np.eye(model.d), F.T @ Y, assume_a="pos")
    return KpcaModel(model.eigvals, model.vectors, w, float(beta))


def predict(model: KpcaModel, rows) -> np.ndarray:
    if model.weights is None:
        raise ValueError("probe not fitted")
    return features(model, rows) @ model.weights
