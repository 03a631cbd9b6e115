"""Per-row importance scores and feature selection from them."""

from dataclasses import dataclass
from math import ceil

import numpy as np

from ._validation import as_generator
from .graph import residual_row_norms

__all__ = ["ScoreVector", "mmf_scores", "leverage_scores", "select_features"]

SCORE_KINDS = ("mmf", "leverage")


@dataclass(frozen=True)
class ScoreVector:
    """Nonnegative per-row scores with the labels they refer to."""

    values: np.ndarray
    labels: tuple
    kind: str

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(values)):
            raise ValueError("scores must be finite")
        if np.any(values < 0):
            raise ValueError("scores must be nonnegative")
        labels = tuple(str(s) for s in self.labels)
        if len(labels) != values.size:
            raise ValueError(f"got {len(labels)} labels for {values.size} scores")
        if self.kind not in SCORE_KINDS:
            raise ValueError(f"kind must be one of {SCORE_KINDS}, got {self.kind!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.values.size


def _labels(C, m):
    labels = getattr(C, "labels", None)
    return tuple(labels) if labels is not None else tuple(str(i) for i in range(m))


def mmf_scores(C, graph):
    """Row norms of the factorization residual ``C - MMF(C)``.

    A large score means the row carries information the factorization could
    not express through the shared multiresolution basis.
    """
    values = residual_row_norms(np.asarray(C, dtype=np.float64), graph)
    return ScoreVector(values, _labels(C, graph.m), "mmf")


def leverage_scores(C, rank):
    """Statistical leverage of each row with respect to the top ``rank`` eigenvectors.

    Eigenvectors are ranked by eigenvalue after clipping negatives to zero;
    clipped ones keep their descending order.
    The scores are the squared row norms of the ``m x rank`` eigenvector
    matrix and sum to ``rank``.
    """
    A = np.asarray(C, dtype=np.float64)
    m = A.shape[0]
    rank = int(rank)
    if not 1 <= rank <= m:
        raise ValueError(f"rank must be in [1, {m}], got {rank}")
    w, V = np.linalg.eigh((A + A.T) / 2.0)
    order = np.argsort(-np.clip(w, 0.0, None)[::-1], kind="stable")
    top = V[:, ::-1][:, order[:rank]]
    return ScoreVector(np.sum(top * top, axis=1), _labels(C, m), "leverage")


def select_features(scores, fraction, mode="top", rng=None):
    """Choose ``ceil(fraction * m)`` indices from a score vector.

    ``mode="top"`` keeps the highest scores, ties going to the smaller index.
    ``mode="sample"`` draws without replacement with probability proportional
    to the scores (uniformly when they are all zero). Returns sorted indices.
    """
    values = np.asarray(getattr(scores, "values", scores), dtype=np.float64).ravel()
    m = values.size
    if m == 0:
        raise ValueError("cannot select from an empty score vector")
    fraction = float(fraction)
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    n = min(m, ceil(fraction * m - 1e-12))
    if mode == "top":
        chosen = np.argsort(-values, kind="stable")[:n]
    elif mode == "sample":
        rng = as_generator(rng)
        total = values.sum()
        p = values / total if total > 0 else np.full(m, 1.0 / m)
        # fewer positive scores than requested: fill up uniformly from the zeros
        n_pos = int(np.count_nonzero(p))
        if n_pos < n:
            pos = np.flatnonzero(p)
            rest = rng.choice(np.flatnonzero(p == 0), size=n - n_pos, replace=False)
            chosen = np.concatenate([pos, rest])
        else:
            chosen = rng.choice(m, size=n, replace=False, p=p)
    else:
        raise ValueError(f"mode must be 'top' or 'sample', got {mode!r}")
    return sorted(int(i) for i in chosen)
