import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from incmmf import MMF, IncrementalMMF
from incmmf.batch import batch_mmf
from incmmf.graph import MmfConfig, error_identity

from conftest import random_psd


def test_params_and_clone():
    est = MMF(order=2, variant="eigen", random_state=3)
    params = est.get_params()
    assert params["order"] == 2 and params["variant"] == "eigen"
    other = clone(est)
    assert other.get_params() == params and other is not est
    inc = IncrementalMMF(init_fraction=0.3)
    assert clone(inc).get_params()["init_fraction"] == 0.3


def test_fit_precomputed_matches_batch():
    C = random_psd(8, 0)
    est = MMF(order=3, random_state=1, dict_size=10, precomputed=True).fit(C)
    g, _ = batch_mmf(C, MmfConfig(k=3, seed=1, dict_size=10), np.random.default_rng(1))
    assert est.graph_.wavelets == g.wavelets
    assert est.frob_error_ ** 2 == pytest.approx(est.level_errors_.sum(), rel=1e-8)
    assert est.n_features_in_ == 8
    assert est.scores_.shape == (8,)
    assert np.linalg.norm(est.reconstruct() - C) == pytest.approx(est.frob_error_, rel=1e-8)


def test_fit_from_samples_uses_covariance():
    X = np.random.default_rng(2).standard_normal((40, 6))
    est = MMF(order=2, variant="eigen").fit(X)
    assert np.allclose(est.matrix_, np.cov(X, rowvar=False))


def test_transform_round_trip():
    X = np.random.default_rng(3).standard_normal((30, 7))
    est = MMF(order=3, dict_size=5, random_state=0).fit(X)
    W = est.transform(X)
    assert W.shape == X.shape
    assert np.allclose(est.inverse_transform(W), X)
    # coordinates in an orthogonal basis keep row norms
    assert np.allclose(np.linalg.norm(W, axis=1), np.linalg.norm(X, axis=1))


def test_transform_before_fit():
    with pytest.raises(NotFittedError):
        MMF().transform(np.ones((2, 3)))


def test_transform_checks_feature_count():
    est = MMF(order=2, variant="eigen").fit(np.random.default_rng(0).standard_normal((10, 4)))
    with pytest.raises(ValueError):
        est.transform(np.ones((2, 5)))


def test_incremental_estimator():
    C = random_psd(12, 5)
    est = IncrementalMMF(order=3, random_state=0, dict_size=10, precomputed=True).fit(C)
    assert est.graph_.n_levels == 10
    assert error_identity(C, est.graph_)[3] <= 1e-8


def test_partial_fit_grows_graph():
    C = random_psd(12, 6)
    est = IncrementalMMF(order=3, random_state=0, dict_size=10, precomputed=True)
    est.partial_fit(C[:9, :9])
    assert est.graph_.m == 9
    est.partial_fit(C)
    assert est.graph_.m == 12 and est.graph_.n_levels == 10
    assert est.n_features_in_ == 12
    assert error_identity(C, est.graph_)[3] <= 1e-8


def test_partial_fit_validation():
    C = random_psd(8, 7)
    with pytest.raises(ValueError, match="precomputed"):
        IncrementalMMF().partial_fit(C)
    est = IncrementalMMF(order=2, precomputed=True, variant="eigen").fit(C)
    with pytest.raises(ValueError, match="shrank"):
        est.partial_fit(C[:5, :5])
    D = random_psd(9, 8)
    with pytest.raises(ValueError, match="leading"):
        est.partial_fit(D)


def test_precomputed_rejects_asymmetric():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError, match="symmetric"):
        MMF(order=2, precomputed=True).fit(A)
    est = MMF(order=2, precomputed=True, symmetrize=True, variant="eigen").fit(A)
    assert est.matrix_[0, 1] == 1.0
