"""scikit-learn style wrappers around the functional API.

``X`` at fit time is the Gram matrix over visible samples with the ``n``
labeled ones first (``n = len(y)``); at predict time it is a matrix of
kernel rows, one query per row, in the same sample order.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import kpca as kp
from . import solvers
from .labelprop import LabelPropConfig, propagate
from .transform import InverseTransform, TopD
from .validation import (check_class_labels, check_gram, check_positive, check_rows,
                         check_targets, check_transform)


class SpectralKernelRegressor(RegressorMixin, BaseEstimator):
    """Kernel ridge regression with a spectrally transformed kernel.

    ``transform`` is a transform object or a string such as ``"poly:p=8"``
    or ``"invlap:eta=0.99"``.  ``solver`` is ``"auto"`` (Richardson) or
    ``"direct"`` (polynomials only).  ``n_iter`` caps Richardson updates
    and disables the convergence error.
    """

    def __init__(self, transform="poly:p=8", beta=1e-2, solver="auto", step="auto", tol=1e-6,
                 max_iter=10_000, n_iter=None, lambda_max=1.0):
        self.transform = transform
        self.beta = beta
        self.solver = solver
        self.step = step
        self.tol = tol
        self.max_iter = max_iter
        self.n_iter = n_iter
        self.lambda_max = lambda_max

    def _fit_targets(self, X, Y):
        t = check_transform(self.transform, self.lambda_max)
        if isinstance(t, TopD):
            raise ValueError("use TopDClassifier for the kernel-PCA path")
        beta = check_positive("beta", self.beta)
        G = check_gram(X, Y.shape[0])
        if self.solver == "direct":
            if isinstance(t, InverseTransform):
                raise ValueError("direct solver needs a polynomial transform")
            model = solvers.fit_direct(G, t, beta, Y)
        elif self.solver == "auto":
            kw = dict(step=self.step, tol=self.tol, max_iters=self.max_iter, n_iter=self.n_iter)
            model = solvers.fit(G, t, beta, Y, **kw)
        else:
            raise ValueError(f"unknown solver {self.solver!r}")
        self.model_ = model
        self.n_features_in_ = G.size
        return self

    def fit(self, X, y):
        y = check_targets(y)
        self._single_output_ = y.ndim == 1
        return self._fit_targets(X, y[:, None] if y.ndim == 1 else y)

    def _scores(self, X):
        check_is_fitted(self, "model_")
        return solvers.predict(self.model_, check_rows(X, self.n_features_in_))

    def predict(self, X):
        s = self._scores(X)
        return s[:, 0] if getattr(self, "_single_output_", False) else s


class SpectralKernelClassifier(ClassifierMixin, SpectralKernelRegressor):
    """One-vs-rest classifier; ties in the argmax go to the first class."""

    def fit(self, X, y):
        self.classes_, Y = check_class_labels(y)
        return self._fit_targets(X, Y)

    def decision_function(self, X):
        return self._scores(X)

    def predict(self, X):
        return self.classes_[np.argmax(self._scores(X), axis=1)]


class TopDKernelPCA(TransformerMixin, BaseEstimator):
    """Top-``d`` eigenfunctions of an unlabeled Gram matrix."""

    def __init__(self, d=128):
        self.d = d

    def fit(self, X, y=None):
        X = check_gram(X, 0).matrix
        self.model_ = kp.fit_kpca(X, int(self.d))
        self.n_features_in_ = X.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return kp.features(self.model_, check_rows(X, self.n_features_in_))


class TopDClassifier(ClassifierMixin, BaseEstimator):
    """Kernel PCA on the unlabeled block, then a ridge probe without bias."""

    def __init__(self, d=128, beta=1e-2):
        self.d = d
        self.beta = beta

    def fit(self, X, y):
        self.classes_, Y = check_class_labels(y)
        beta = check_positive("beta", self.beta)
        G = check_gram(X, len(Y))
        n = G.n
        M = G.matrix
        model = kp.fit_kpca(M[n:, n:], int(self.d))
        self.model_ = kp.fit_probe(model, kp.features(model, M[:n, n:]), Y, beta)
        self.n_labeled_ = n
        self.n_features_in_ = G.size
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        R = check_rows(X, self.n_features_in_)
        return kp.predict(self.model_, R[:, self.n_labeled_:])

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


class LabelPropagation(ClassifierMixin, BaseEstimator):
    """Transductive label propagation on a normalized adjacency ``X``.

    After `fit`, ``transduction_`` holds a predicted class for every node;
    `predict` takes node positions.
    """

    def __init__(self, eta=0.99, n_iter="exact"):
        self.eta = eta
        self.n_iter = n_iter

    def fit(self, X, y):
        self.classes_, Y = check_class_labels(y)
        S = check_gram(X, len(Y)).matrix
        self.scores_ = propagate(S, Y, LabelPropConfig(self.eta, self.n_iter))
        self.transduction_ = self.classes_[np.argmax(self.scores_, axis=1)]
        return self

    def predict(self, X):
        check_is_fitted(self, "transduction_")
        return self.transduction_[np.asarray(X, dtype=np.int64)]
