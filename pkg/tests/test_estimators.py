import numpy as np
import pytest
import scipy.sparse as sp
from sklearn.base import clone

from stkr import (LabelPropagation, SpectralKernelClassifier, SpectralKernelRegressor,
                  TopDClassifier, TopDKernelPCA)
from stkr import solvers
from stkr.transform import PolyTransform

from conftest import psd_gram


@pytest.fixture
def gram():
    return psd_gram(7, 40, 10)


def test_params_and_clone():
    est = SpectralKernelRegressor(transform="invlap:eta=0.9", beta=0.5, tol=1e-8)
    params = est.get_params()
    assert params["transform"] == "invlap:eta=0.9" and params["beta"] == 0.5
    twin = clone(est)
    assert twin.get_params() == params
    assert "model_" not in vars(twin)


def test_regressor_matches_functional(gram):
    y = np.linspace(-1, 1, 10)
    est = SpectralKernelRegressor(transform="poly:p=2", beta=0.1, solver="direct").fit(gram.matrix, y)
    ref = solvers.fit_direct(gram, PolyTransform.monomial(2), 0.1, y[:, None])
    R = gram.toarray()
    assert est.predict(R).shape == (40,)
    assert np.allclose(est.predict(R), solvers.predict(ref, R)[:, 0])
    rich = SpectralKernelRegressor(transform="poly:p=2", beta=0.1, tol=1e-12).fit(gram, y)
    assert np.allclose(rich.predict(sp.csr_matrix(R)), est.predict(R), atol=1e-8)


def test_classifier_labels_and_scores(gram):
    y = np.array(["a", "b"] * 5)
    clf = SpectralKernelClassifier(transform="invlap:eta=0.5", beta=0.1).fit(gram.matrix, y)
    assert list(clf.classes_) == ["a", "b"]
    scores = clf.decision_function(gram.toarray())
    assert scores.shape == (40, 2)
    assert set(clf.predict(gram.toarray())) <= {"a", "b"}


def test_estimator_errors(gram):
    with pytest.raises(ValueError):
        SpectralKernelRegressor(beta=0).fit(gram.matrix, np.ones(10))
    with pytest.raises(ValueError):
        SpectralKernelRegressor(transform="invlap:eta=0.5", solver="direct").fit(gram.matrix, np.ones(10))
    with pytest.raises(ValueError):
        SpectralKernelRegressor(solver="cg").fit(gram.matrix, np.ones(10))
    with pytest.raises(ValueError):
        SpectralKernelRegressor().fit(np.ones((3, 4)), np.ones(2))
    with pytest.raises(ValueError):
        SpectralKernelRegressor().fit(gram.matrix, np.full(10, np.nan))
    est = SpectralKernelRegressor(transform="poly:p=1", solver="direct").fit(gram.matrix, np.ones(10))
    with pytest.raises(ValueError):
        est.predict(np.ones((2, 39)))
    with pytest.raises(Exception):
        SpectralKernelRegressor().predict(np.ones((1, 40)))


def test_topd_pipeline(gram):
    M = gram.toarray()
    pca = TopDKernelPCA(d=4).fit(M[10:, 10:])
    F = pca.transform(M[:, 10:])
    assert F.shape == (40, 4)
    clf = TopDClassifier(d=4, beta=0.1).fit(gram.matrix, np.arange(10) % 2)
    assert clf.decision_function(M).shape == (40, 2)
    # the classifier only looks at the unlabeled block
    assert np.allclose(clf.decision_function(M[:, :]),
                       clf.decision_function(np.where(np.arange(40) < 10, 0.0, M)))


def test_label_propagation(gram):
    S = gram.matrix / gram.size
    lp = LabelPropagation(eta=0.5).fit(S, np.arange(10) % 3)
    assert lp.scores_.shape == (40, 3)
    assert np.array_equal(lp.predict([0, 1, 2]), lp.transduction_[:3])
    with pytest.raises(ValueError):
        LabelPropagation(eta=1.0).fit(S, np.arange(10) % 3)
