"""Label propagation on the normalized adjacency (transductive only)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

EXACT = "exact"


@dataclass(frozen=True)
class LabelPropConfig:
    """``eta`` in ``[0, 1)``; ``n_iter`` is a step count or ``"exact"``."""

    eta: float
    n_iter: int | str = EXACT

    def __post_init__(self):
        if not 0 <= self.eta < 1:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")
        if self.n_iter != EXACT and (int(self.n_iter) != self.n_iter or self.n_iter < 0):
            raise ValueError(f"n_iter must be a nonnegative integer or 'exact', got {self.n_iter}")


def propagate(S, Y, cfg: LabelPropConfig, tol: float = 1e-10) -> np.ndarray:
    """Scores on all ``n + m`` nodes.

    Iterates ``y <- eta S y + y0`` from ``y0 = [Y; 0]``, or solves
    ``(I - eta S) y = y0`` by conjugate gradients in the exact mode.
    ``S`` is the normalized adjacency with labeled nodes first.
    """
    S = sp.csr_matrix(S, dtype=np.float64)
    N = S.shape[0]
    Y = np.asarray(Y, dtype=np.float64)
    squeeze = Y.ndim == 1
    Y = Y[:, None] if squeeze else Y
    if Y.shape[0] > N:
        raise ValueError("more labels than nodes")
    y0 = np.zeros((N, Y.shape[1]))
    y0[: Y.shape[0]] = Y
    eta = cfg.eta
    if cfg.n_iter == EXACT:
        op = spla.LinearOperator((N, N), matvec=lambda x: x - eta * (S @ x), dtype=np.float64)
        out = np.empty_like(y0)
        for c in range(y0.shape[1]):
            if not y0[:, c].any():
                out[:, c] = 0.0
                continue
            x, info = spla.cg(op, y0[:, c], x0=y0[:, c], rtol=tol, atol=0.0, maxiter=10 * N + 1000)
            if info != 0:
                raise RuntimeError(f"CG failed to converge (info={info})")
            out[:, c] = x
    else:
        out = y0.copy()
        for _ in range(int(cfg.n_iter)):
            out = eta * (S @ out) + y0
    return out[:, 0] if squeeze else out
