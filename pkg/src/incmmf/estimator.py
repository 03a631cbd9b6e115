"""scikit-learn style estimators wrapping the batch and incremental factorizers."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, validate_data

from ._validation import DEFAULT_SYM_TOL, as_generator, check_symmetric_matrix
from .analysis import mmf_scores
from .batch import batch_mmf
from .graph import (
    MmfConfig,
    compress,
    factorization_error,
    inverse_wavelet_transform,
    reconstruct,
    wavelet_transform,
)
from .incremental import _insert, incremental_mmf

__all__ = ["MMF", "IncrementalMMF"]


class MMF(TransformerMixin, BaseEstimator):
    """Multiresolution factorization of a symmetric matrix.

    Parameters
    ----------
    order : int, default=3
        Number of indices ``k`` each rotation acts on.
    n_levels : int or "max", default="max"
        Number of levels; "max" is ``m - order + 1``.
    variant : {"exhaustive", "eigen", "correlation-greedy"}, default="exhaustive"
    dict_size : int, default=50
        Random rotations tried next to the eigenvector rotation.
    random_state : int, Generator or None, default=None
    literal_eq6 : bool, default=False
        Correlation heuristic picks the smallest signed cosines instead of the
        largest absolute ones.
    sym_tol : float, default=1e-9
    symmetrize : bool, default=False
        Average the input with its transpose instead of rejecting asymmetry.
    precomputed : bool, default=False
        If True, ``fit`` receives the symmetric matrix itself; otherwise it
        receives an ``(n_samples, n_features)`` data matrix and factorizes its
        sample covariance.

    Attributes
    ----------
    graph_ : MmfGraph
    compression_ : ndarray of shape (m, m)
        Final compression ``Qbar C Qbar^T``.
    matrix_ : ndarray of shape (m, m)
        The factorized matrix.
    frob_error_ : float
    level_errors_ : ndarray of shape (n_levels,)
    core_set_ : tuple of int
    scores_ : ndarray of shape (m,)
        Residual row norms.
    n_features_in_ : int
    """

    def __init__(self, order=3, n_levels="max", variant="exhaustive", dict_size=50,
                 random_state=None, literal_eq6=False, sym_tol=DEFAULT_SYM_TOL,
                 symmetrize=False, precomputed=False):
        self.order = order
        self.n_levels = n_levels
        self.variant = variant
        self.dict_size = dict_size
        self.random_state = random_state
        self.literal_eq6 = literal_eq6
        self.sym_tol = sym_tol
        self.symmetrize = symmetrize
        self.precomputed = precomputed

    def _config(self, **extra):
        seed = self.random_state if isinstance(self.random_state, (int, np.integer)) else 0
        return MmfConfig(k=self.order, n_levels=self.n_levels, variant=self.variant,
                         dict_size=self.dict_size, seed=int(seed), literal_eq6=self.literal_eq6,
                         sym_tol=self.sym_tol, **extra)

    def _as_matrix(self, X):
        if self.precomputed:
            X = validate_data(self, X, reset=True, dtype=np.float64)
            return check_symmetric_matrix(X, self.sym_tol, self.symmetrize)
        X = validate_data(self, X, reset=True, dtype=np.float64, ensure_min_samples=2)
        Xc = X - X.mean(axis=0)
        C = Xc.T @ Xc / (X.shape[0] - 1)
        return (C + C.T) / 2.0

    def _factorize(self, C, rng):
        return batch_mmf(C, self._config(), rng)[0]

    def _store(self, C, graph):
        self.matrix_ = C
        self.graph_ = graph
        self.compression_ = compress(C, graph)
        self.frob_error_, self.level_errors_ = factorization_error(C, graph)
        self.core_set_ = graph.core_set
        self.scores_ = np.asarray(mmf_scores(C, graph).values)
        return self

    def fit(self, X, y=None):
        """Factorize ``X`` (or its covariance when ``precomputed=False``)."""
        C = self._as_matrix(X)
        graph = self._factorize(C, as_generator(self.random_state))
        return self._store(C, graph)

    def transform(self, X):
        """Coordinates of the rows of ``X`` in the factorization's wavelet basis."""
        check_is_fitted(self, "graph_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return wavelet_transform(X, self.graph_)

    def inverse_transform(self, X):
        check_is_fitted(self, "graph_")
        X = check_array(X, dtype=np.float64)
        return inverse_wavelet_transform(X, self.graph_)

    def reconstruct(self):
        """The approximation ``Qbar^T R Qbar`` of the factorized matrix."""
        check_is_fitted(self, "graph_")
        return reconstruct(self.graph_, self.compression_)


class IncrementalMMF(MMF):
    """Factorization built by inserting rows one at a time into a small batch start.

    Parameters
    ----------
    init_fraction : float, default=0.1
        Share of the leading rows factorized in batch before insertions begin.
    insert_order : {"natural", "shuffle"}, default="natural"
    **params
        As for :class:`MMF`.
    """

    def __init__(self, order=3, n_levels="max", variant="exhaustive", dict_size=50,
                 random_state=None, literal_eq6=False, sym_tol=DEFAULT_SYM_TOL,
                 symmetrize=False, precomputed=False, init_fraction=0.1,
                 insert_order="natural"):
        super().__init__(order=order, n_levels=n_levels, variant=variant, dict_size=dict_size,
                         random_state=random_state, literal_eq6=literal_eq6, sym_tol=sym_tol,
                         symmetrize=symmetrize, precomputed=precomputed)
        self.init_fraction = init_fraction
        self.insert_order = insert_order

    def _factorize(self, C, rng):
        config = self._config(init_fraction=self.init_fraction, insert_order=self.insert_order)
        return incremental_mmf(C, config, rng)

    def partial_fit(self, X, y=None):
        """Extend the factorization to a grown matrix.

        ``X`` must be symmetric, at least as large as the matrix already
        factorized, and agree with it on the leading block; each new row is
        inserted in order. Only available with ``precomputed=True``. Without a
        previous fit this is the same as :meth:`fit`.
        """
        if not self.precomputed:
            raise ValueError("partial_fit needs precomputed=True: new rows must be matrix rows")
        if not hasattr(self, "graph_"):
            return self.fit(X)
        X = check_array(X, dtype=np.float64)
        C = check_symmetric_matrix(X, self.sym_tol, self.symmetrize)
        m_old = self.graph_.m
        if C.shape[0] < m_old:
            raise ValueError(f"matrix shrank from {m_old} to {C.shape[0]} rows")
        if not np.allclose(C[:m_old, :m_old], self.matrix_, rtol=0.0, atol=self.sym_tol):
            raise ValueError(f"leading {m_old}x{m_old} block differs from the fitted matrix")
        config = self._config()
        L_max = config.resolve_levels(C.shape[0])
        rng = as_generator(self.random_state)
        graph = self.graph_
        for j in range(m_old, C.shape[0]):
            graph, _ = _insert(C[:j, :j], C[j, : j + 1], graph, config, rng,
                               append_level=graph.n_levels < L_max, trace=None)
        self.n_features_in_ = C.shape[0]
        return self._store(C, graph)
