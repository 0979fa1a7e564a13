"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numbers

import numpy as np
import scipy.sparse as sp

from .kernel import SparseGram
from .transform import InverseTransform, PolyTransform, TopD, parse_transform


def check_positive(name: str, value) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_gram(X, n: int) -> SparseGram:
    """Coerce ``X`` (SparseGram, sparse or dense square matrix) to `SparseGram`."""
    if isinstance(X, SparseGram):
        if X.n != n:
            raise ValueError(f"Gram has n={X.n} labeled samples but y has {n} rows")
        return X
    if not sp.issparse(X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"Gram must be 2-D, got shape {X.shape}")
    if X.shape[0] != X.shape[1]:
        raise ValueError(f"Gram must be square, got shape {X.shape}")
    if n > X.shape[0]:
        raise ValueError(f"{n} labels for a Gram over {X.shape[0]} samples")
    data = X.data if sp.issparse(X) else X
    if not np.all(np.isfinite(data)):
        raise ValueError("Gram contains NaN or inf")
    return SparseGram(X, n)


def check_rows(R, size: int):
    """Kernel rows as a 2-D array or CSR matrix with ``size`` columns."""
    if sp.issparse(R):
        R = R.tocsr()
    else:
        R = np.atleast_2d(np.asarray(R, dtype=np.float64))
        if R.ndim != 2:
            raise ValueError(f"kernel rows must be 2-D, got shape {R.shape}")
    if R.shape[1] != size:
        raise ValueError(f"kernel rows must have {size} columns, got {R.shape[1]}")
    return R


def check_targets(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim not in (1, 2) or len(y) == 0:
        raise ValueError(f"targets must be a non-empty 1-D or 2-D array, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets contain NaN or inf")
    return y


def check_class_labels(y):
    """Integer class labels -> (classes, one-hot matrix)."""
    y = np.asarray(y)
    if y.ndim != 1 or len(y) == 0:
        raise ValueError("class labels must be a non-empty 1-D array")
    classes, inv = np.unique(y, return_inverse=True)
    return classes, np.eye(len(classes))[inv]


def check_transform(t, lambda_max: float = 1.0):
    if isinstance(t, str):
        t = parse_transform(t, lambda_max)
    if not isinstance(t, (PolyTransform, InverseTransform, TopD)):
        raise TypeError(f"unsupported transform {t!r}")
    return t
