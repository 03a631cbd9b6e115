"""Input validation helpers shared by the estimators and the functional API."""

import numpy as np
from sklearn.utils.validation import check_array

DEFAULT_SYM_TOL = 1e-9
DEFAULT_ORTH_TOL = 1e-10
MAX_ORDER = 16


class ConvergenceError(RuntimeError):
    """An iterative kernel did not reach its tolerance."""


def check_symmetric_matrix(C, sym_tol=DEFAULT_SYM_TOL, symmetrize=False):
    """Validate a dense symmetric matrix and return it as a float64 array.

    Parameters
    ----------
    C : array-like of shape (m, m)
    sym_tol : float
        Entries must satisfy ``|C[i, j] - C[j, i]| <= sym_tol * max(1, |C[i, j]|)``.
    symmetrize : bool
        If True, replace ``C`` by ``(C + C.T) / 2`` instead of rejecting it.

    Returns
    -------
    ndarray of shape (m, m)
        A fresh copy; the caller may mutate it.
    """
    C = check_array(np.asarray(C), dtype=np.float64, ensure_2d=True,
                    ensure_all_finite=True, copy=True)
    if C.shape[0] != C.shape[1]:
        raise ValueError(f"matrix must be square, got shape {C.shape}")
    if symmetrize:
        return (C + C.T) / 2.0
    diff = np.abs(C - C.T)
    bound = sym_tol * np.maximum(1.0, np.abs(C))
    bad = np.argwhere(np.tril(diff > bound, -1))
    if bad.size:
        i, j = bad[0]
        raise ValueError(
            f"matrix is not symmetric at entry ({i + 1},{j + 1}) (1-based): "
            f"{float(C[i, j])!r} vs {float(C[j, i])!r}; pass symmetrize=True (--symmetrize) to average"
        )
    # exact symmetry downstream; differences are below tolerance anyway
    return (C + C.T) / 2.0


def check_index_set(indices, m, name="indices"):
    """Return ``indices`` as a tuple of distinct ints in ``[0, m)``."""
    out = tuple(int(i) for i in indices)
    if len(set(out)) != len(out):
        raise ValueError(f"{name} contains repeated entries: {out}")
    for i in out:
        if not 0 <= i < m:
            raise ValueError(f"{name} entry {i} out of range for dimension {m}")
    return out


def check_orthogonal(O, tol=DEFAULT_ORTH_TOL, name="rotation block"):
    O = np.asarray(O, dtype=np.float64)
    if O.ndim != 2 or O.shape[0] != O.shape[1]:
        raise ValueError(f"{name} must be square, got shape {O.shape}")
    dev = np.max(np.abs(O.T @ O - np.eye(O.shape[0]))) if O.size else 0.0
    if not dev <= tol:
        raise ValueError(f"{name} is not orthogonal (max |O^T O - I| = {dev:.3e})")
    return O


def check_order(k):
    k = int(k)
    if not 2 <= k <= MAX_ORDER:
        raise ValueError(f"rotation order k must be in [2, {MAX_ORDER}], got {k}")
    return k


def as_generator(random_state):
    """Turn a seed, ``Generator`` or None into a ``numpy.random.Generator``."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)
