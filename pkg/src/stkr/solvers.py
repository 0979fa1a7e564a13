"""STKR solvers: direct assembly, Richardson for polynomial ``s`` and
Richardson for ``s`` with a polynomial reciprocal.

All three minimize the same kernel ridge objective in the RKHS of the
empirical transformed kernel

    K_s(x, x') = pi_1 K(x, x') + sum_{p>=2} pi_p v_K(x)^T G_K^{p-2} v_K(x') / N^{p-1}

whose coefficient vector solves ``(G_{K_s, n} + n beta I) alpha = y``.
Labels are handled one column per class; columns are updated as a block but
stop independently.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .kernel import SparseGram
from .transform import InverseTransform, PolyTransform, Transform, linear_coefficient

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 10_000
POWER_STEPS = 50


class ConvergenceError(RuntimeError):
    """Richardson iteration hit ``max_iters`` before reaching ``tol``."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class StkrModel:
    """Fitted STKR state.

    ``cache`` holds the vector needed at inference: for the polynomial path
    the Horner vector ``v`` of the final iterate, for the inverse path
    ``w = (G_K/N)^(r-1) theta``.  Arrays are 2-D with one column per output.
    """

    transform: Transform
    beta: float
    n: int
    size: int
    alpha: np.ndarray | None
    theta: np.ndarray | None
    cache: np.ndarray
    residual: np.ndarray
    iterations: int
    solver: str
    converged: bool = True

    @property
    def n_outputs(self) -> int:
        return self.cache.shape[1]


def _as_2d(Y, n):
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.shape[0] != n:
        raise ValueError(f"labels must have {n} rows, got shape {Y.shape}")
    return Y


def _check_inputs(G: SparseGram, beta, Y):
    if not isinstance(G, SparseGram):
        raise TypeError("G must be a SparseGram")
    if G.n < 1:
        raise ValueError("need at least one labeled sample")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return _as_2d(Y, G.n)


class _Operators:
    """Cached sparse pieces of ``G_K`` shared by the solvers."""

    def __init__(self, G: SparseGram):
        self.G = G.matrix
        self.N = G.size
        self.n = G.n
        self.Gn = G.labeled_columns          # (N, n)
        self.GnT = self.Gn.T.tocsr()         # (n, N)

    def S(self, x):
        return (self.G @ x) / self.N

    def poly_horner(self, t: PolyTransform, alpha_tilde):
        """Line 4 of the polynomial Richardson loop."""
        v = np.zeros_like(alpha_tilde)
        for p in range(t.q, 1, -1):
            v = self.S(v) + t.pi(p) * alpha_tilde
        return v

    def poly_apply(self, t: PolyTransform, beta, alpha):
        """``u = (G_{K_s,n} + n beta I) alpha`` and the inference vector ``v``."""
        g_alpha = self.Gn @ alpha
        v = self.poly_horner(t, g_alpha / self.N)
        u = self.GnT @ v + t.pi(1) * g_alpha[: self.n] + self.n * beta * alpha
        return u, v

    def q_apply(self, t: InverseTransform, theta):
        """``Q theta`` with ``Q = sum_p xi_p (G/N)^p`` by Horner."""
        v = np.zeros_like(theta)
        for p in range(t.q - 1, -1, -1):
            v = self.S(v) + t.xi[p] * theta
        return v

    def s_power(self, theta, r):
        z = theta
        for _ in range(r):
            z = self.S(z)
        return z

    def m_apply(self, t: InverseTransform, beta, theta):
        """``M theta = N I_n (G/N)^r theta + n beta Q theta``."""
        top = self.N * self.s_power(theta, t.r)
        top[self.n:] = 0.0
        return top + self.n * beta * self.q_apply(t, theta)


def _power_norm(apply, dim, cols=1, steps=POWER_STEPS):
    x = np.random.Generator(np.random.Philox(0)).standard_normal((dim, cols))
    est = 0.0
    for _ in range(steps):
        z = apply(x)
        nz = np.linalg.norm(z)
        if nz == 0:
            return 0.0
        est = nz / np.linalg.norm(x)
        x = z / nz
    return est


def auto_step(G: SparseGram, t: Transform, beta: float, method: str | None = None) -> float:
    """Richardson step size.

    ``"prescribed"`` returns ``1 / (n lambda_max^r)`` (inverse form only).
    ``"power"`` returns ``1 / ||A||`` with the norm estimated by power
    iteration on the implicit system operator.  The default is
    ``"power"`` for polynomials and ``"safe"`` for the inverse form: the
    prescribed step unless it exceeds the power-iteration bound, which
    happens when ``n`` is small relative to ``n + m``.
    """
    if method is None:
        method = "safe" if isinstance(t, InverseTransform) else "power"
    if method in ("prescribed", "safe"):
        if not isinstance(t, InverseTransform):
            raise ValueError(f"{method!r} step is defined for inverse-form transforms")
        prescribed = 1.0 / (G.n * t.lambda_max ** t.r)
        if method == "prescribed":
            return prescribed
        return min(prescribed, auto_step(G, t, beta, "power"))
    if method != "power":
        raise ValueError(f"unknown step method {method!r}")
    ops = _Operators(G)
    if isinstance(t, PolyTransform):
        norm = _power_norm(lambda a: ops.poly_apply(t, beta, a)[0], G.n)
    else:
        norm = _power_norm(lambda th: ops.m_apply(t, beta, th), G.size)
    if norm == 0:
        raise SingularSystemError("system operator is zero")
    return 1.0 / norm


def _resolve_step(G, t, beta, step):
    if step is None or step == "auto":
        return auto_step(G, t, beta)
    if isinstance(step, str):
        return auto_step(G, t, beta, method=step)
    step = float(step)
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    return step


def _converged(res, ynorm, tol):
    return (res < tol * ynorm) | (res == 0)


def fit_direct(G: SparseGram, t: PolyTransform, beta: float, Y) -> StkrModel:
    """Assemble ``A = G_{K_s,n} + n beta I`` explicitly and solve it densely."""
    if not isinstance(t, PolyTransform):
        raise TypeError("direct solve needs a finite polynomial transform")
    Y = _check_inputs(G, beta, Y)
    ops = _Operators(G)
    n, N = ops.n, ops.N
    Gn = ops.Gn.toarray()
    A = n * beta * np.eye(n) + t.pi(1) * Gn[:n]
    M = Gn
    for p in range(2, t.q + 1):
        A += (t.pi(p) / N) * (Gn.T @ M)
        M = (ops.G @ M) / N
    A = 0.5 * (A + A.T)
    try:
        alpha = sla.solve(A, Y, assume_a="sym", check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise SingularSystemError(f"STKR system is singular: {exc}") from exc
    if not np.all(np.isfinite(alpha)):
        raise SingularSystemError("STKR system is numerically singular")
    u, v = ops.poly_apply(t, beta, alpha)
    res = np.linalg.norm(u - Y, axis=0) / np.maximum(np.linalg.norm(Y, axis=0), np.finfo(float).tiny)
    return StkrModel(t, float(beta), n, N, alpha, None, v, res, 0, "direct")


def _check_finite(rn, it):
    # an indefinite system (e.g. odd powers of a kernel with negative
    # eigenvalues) makes the iterates blow up; stop before they turn to NaN
    if not np.all(np.isfinite(rn)) or np.any(rn > 1e150):
        raise ConvergenceError(f"Richardson iteration diverged after {it} updates",
                               float(np.max(rn)), it)


def _run_poly(G, t, beta, Y, gamma, tol, limit, checkpoints=()):
    """Algorithm loop for polynomial ``s``; residual checked before each update.

    Returns the final model and the models seen at ``checkpoints`` (update
    counts).  Columns that reach ``tol`` are frozen.
    """
    ops = _Operators(G)
    ynorm = np.linalg.norm(Y, axis=0)
    alpha = np.zeros_like(Y)
    active = np.ones(Y.shape[1], dtype=bool)
    v_out = np.zeros((ops.N, Y.shape[1]))
    res = np.full(Y.shape[1], np.inf)
    wanted = set(checkpoints)
    snaps = {}

    def snapshot(it, converged):
        return StkrModel(t, float(beta), ops.n, ops.N, alpha.copy(), None, v_out.copy(),
                         res.copy(), it, "richardson-poly", converged)

    it = 0
    while True:
        idx = np.flatnonzero(active)
        u, v = ops.poly_apply(t, beta, alpha[:, idx])
        r = u - Y[:, idx]
        rn = np.linalg.norm(r, axis=0)
        _check_finite(rn, it)
        res[idx] = rn / np.where(ynorm[idx] > 0, ynorm[idx], 1.0)
        v_out[:, idx] = v
        done = _converged(rn, ynorm[idx], tol)
        active[idx[done]] = False
        if it in wanted:
            snaps[it] = snapshot(it, not active.any())
        if not active.any() or it >= limit:
            break
        alpha[:, idx[~done]] -= gamma * r[:, ~done]
        it += 1
    final = snapshot(it, not active.any())
    for c in wanted:
        snaps.setdefault(c, final)
    return final, snaps


def _run_inverse(G, t, beta, Y, gamma, tol, limit, checkpoints=()):
    """Algorithm loop for inverse-form ``s``; residual checked after each update."""
    ops = _Operators(G)
    n, N = ops.n, ops.N
    y_tilde = np.zeros((N, Y.shape[1]))
    y_tilde[:n] = Y
    ynorm = np.linalg.norm(Y, axis=0)
    theta = np.zeros_like(y_tilde)
    active = np.ones(Y.shape[1], dtype=bool)
    res = np.full(Y.shape[1], np.inf)
    wanted = set(checkpoints)
    snaps = {}

    def snapshot(it, converged):
        th = theta.copy()
        w = ops.s_power(th, t.r - 1)
        q_theta = ops.q_apply(t, th)
        return StkrModel(t, float(beta), n, N, q_theta[:n], th, w, res.copy(), it,
                         "richardson-inverse", converged)

    it = 0
    if 0 in wanted:
        snaps[0] = snapshot(0, False)
    while active.any() and it < limit:
        idx = np.flatnonzero(active)
        a = ops.m_apply(t, beta, theta[:, idx]) - y_tilde[:, idx]
        theta[:, idx] -= gamma * a
        an = np.linalg.norm(a, axis=0)
        _check_finite(an, it)
        res[idx] = an / np.where(ynorm[idx] > 0, ynorm[idx], 1.0)
        active[idx[_converged(an, ynorm[idx], tol)]] = False
        it += 1
        if it in wanted:
            snaps[it] = snapshot(it, not active.any())
    final = snapshot(it, not active.any())
    for c in wanted:
        snaps.setdefault(c, final)
    return final, snaps


def _prepare(G, t, beta, Y, step, tol, kind):
    if not isinstance(t, kind):
        raise TypeError(f"this solver needs a {kind.__name__}")
    Y = _check_inputs(G, beta, Y)
    if not tol > 0:
        raise ValueError("tol must be positive")
    return Y, _resolve_step(G, t, beta, step)


def _finish(model, n_iter, max_iters, tol, label):
    if not model.converged and n_iter is None:
        raise ConvergenceError(
            f"Richardson ({label}) did not reach tol={tol} in {max_iters} iterations; "
            f"max residual {model.residual.max():.3e}", model.residual, model.iterations)
    return model


def fit_richardson_poly(G: SparseGram, t: PolyTransform, beta: float, Y, step="auto",
                        tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
                        n_iter: int | None = None) -> StkrModel:
    """Richardson iteration on ``A alpha = y`` using only mat-vecs with ``G_K``.

    With ``n_iter`` set the loop stops after that many updates (or earlier
    at ``tol``) and never raises; otherwise it raises `ConvergenceError`
    after ``max_iters`` updates.
    """
    Y, gamma = _prepare(G, t, beta, Y, step, tol, PolyTransform)
    limit = max_iters if n_iter is None else n_iter
    model, _ = _run_poly(G, t, beta, Y, gamma, tol, limit)
    return _finish(model, n_iter, max_iters, tol, "poly")


def fit_richardson_inverse(G: SparseGram, t: InverseTransform, beta: float, Y, step="auto",
                           tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
                           n_iter: int | None = None) -> StkrModel:
    """Richardson iteration on ``M theta = [y; 0]`` for inverse-form transforms.

    ``Q theta`` restricted to the labeled block is the STKR coefficient
    vector (stored as ``alpha``); its unlabeled block tends to zero.  The
    residual is checked after each update, so the returned iterate is one
    step past the last residual that was measured.
    """
    Y, gamma = _prepare(G, t, beta, Y, step, tol, InverseTransform)
    limit = max_iters if n_iter is None else n_iter
    model, _ = _run_inverse(G, t, beta, Y, gamma, tol, limit)
    return _finish(model, n_iter, max_iters, tol, "inverse")


def richardson_path(G: SparseGram, t: Transform, beta: float, Y, n_iters, step="auto",
                    tol: float = DEFAULT_TOL) -> dict:
    """Models after each iteration count in ``n_iters``, from one trajectory.

    ``path[T]`` equals ``fit_richardson_*(..., n_iter=T)``.
    """
    n_iters = sorted({int(T) for T in n_iters})
    if not n_iters or n_iters[0] < 0:
        raise ValueError("iteration counts must be nonnegative")
    if isinstance(t, InverseTransform):
        Y, gamma = _prepare(G, t, beta, Y, step, tol, InverseTransform)
        return _run_inverse(G, t, beta, Y, gamma, tol, n_iters[-1], n_iters)[1]
    Y, gamma = _prepare(G, t, beta, Y, step, tol, PolyTransform)
    return _run_poly(G, t, beta, Y, gamma, tol, n_iters[-1], n_iters)[1]


def fit(G: SparseGram, t: Transform, beta: float, Y, solver: str = "auto", **kw) -> StkrModel:
    """Dispatch to a solver; ``"auto"`` picks Richardson for the transform's form."""
    if solver == "direct":
        return fit_direct(G, t, beta, Y)
    if solver not in ("auto", "richardson"):
        raise ValueError(f"unknown solver {solver!r}")
    if isinstance(t, InverseTransform):
        return fit_richardson_inverse(G, t, beta, Y, **kw)
    return fit_richardson_poly(G, t, beta, Y, **kw)


def predict(model: StkrModel, rows) -> np.ndarray:
    """Scores for queries given their kernel rows ``v_K(x)`` (length ``n+m``).

    ``rows`` may be a single vector, a dense matrix or a sparse matrix with
    one query per row.  Runs in ``O(n+m)`` per query.
    """
    single = not sp.issparse(rows) and np.ndim(rows) == 1
    R = rows if sp.issparse(rows) else np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if R.shape[1] != model.size:
        raise ValueError(f"kernel rows must have length {model.size}, got {R.shape[1]}")
    out = R @ model.cache
    if model.solver != "richardson-inverse":
        pi1 = linear_coefficient(model.transform)
        if pi1:
            out = out + pi1 * (R[:, : model.n] @ model.alpha)
    out = np.asarray(out)
    return out[0] if single else out


def predict_visible(model: StkrModel, G: SparseGram) -> np.ndarray:
    """Transductive scores on every visible sample (rows of ``G_K``)."""
    return predict(model, G.matrix)
