"""The factorization record: levels, active sets, compression and reconstruction."""

from dataclasses import dataclass, replace

import numpy as np

from ._validation import (
    DEFAULT_ORTH_TOL,
    DEFAULT_SYM_TOL,
    MAX_ORDER,
    check_order,
)
from .linalg import KPointRotation, _rotate_inplace, core_diag, off_core_diag_sqnorm

__all__ = [
    "LevelRecord",
    "MmfGraph",
    "MmfConfig",
    "VARIANTS",
    "compress",
    "reconstruct",
    "factorization_error",
    "error_identity",
    "offcore_error",
    "residual_row_norms",
    "wavelet_transform",
    "inverse_wavelet_transform",
]

VARIANTS = ("exhaustive", "eigen", "correlation-greedy")


@dataclass(frozen=True)
class LevelRecord:
    """One level of the factorization.

    The wavelet is stored in the last position of ``rotation.indices``;
    ``level_error`` is the level's contribution to the squared error, recorded
    when the level was selected.
    """

    rotation: KPointRotation
    level_error: float

    def __post_init__(self):
        err = float(self.level_error)
        if not (np.isfinite(err) and err >= 0.0):
            raise ValueError(f"level_error must be a nonnegative finite float, got {err}")
        object.__setattr__(self, "level_error", err)

    @property
    def indices(self):
        return self.rotation.indices

    @property
    def wavelet(self):
        return self.rotation.indices[-1]

    @property
    def scaling(self):
        return self.rotation.indices[:-1]


@dataclass(frozen=True)
class MmfGraph:
    """Ordered levels of a multiresolution factorization of an ``m x m`` matrix.

    Level ``l`` rotates indices drawn from the active set ``S_{l-1}`` and then
    retires its wavelet, so ``S_l = S_{l-1} - {wavelet}`` and ``S_0 = [0, m)``.
    The final active set is :attr:`core_set`.
    """

    m: int
    k: int
    levels: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "k", check_order(self.k))
        object.__setattr__(self, "levels", tuple(self.levels))
        self.validate()

    def validate(self):
        """Check nesting, membership and cardinality of the active sets."""
        if self.m < 1:
            raise ValueError(f"matrix dimension must be positive, got {self.m}")
        if self.levels and self.n_levels > self.m - self.k + 1:
            raise ValueError(
                f"{self.n_levels} levels exceed the maximum m - k + 1 = {self.m - self.k + 1}"
            )
        active = set(range(self.m))
        for num, level in enumerate(self.levels, start=1):
            if not isinstance(level, LevelRecord):
                raise TypeError(f"level {num} is not a LevelRecord")
            if len(level.indices) != self.k:
                raise ValueError(f"level {num} rotates {len(level.indices)} indices, expected {self.k}")
            outside = [i for i in level.indices if i not in active]
            if outside:
                raise ValueError(f"level {num} uses inactive indices {outside}")
            active.discard(level.wavelet)

    @property
    def n_levels(self):
        return len(self.levels)

    @property
    def wavelets(self):
        return [lv.wavelet for lv in self.levels]

    @property
    def level_errors(self):
        return np.array([lv.level_error for lv in self.levels], dtype=np.float64)

    @property
    def core_set(self):
        retired = set(self.wavelets)
        return tuple(i for i in range(self.m) if i not in retired)

    def active_sets(self):
        """List ``[S_0, S_1, ..., S_L]`` as sorted tuples."""
        active = list(range(self.m))
        out = [tuple(active)]
        for lv in self.levels:
            active.remove(lv.wavelet)
            out.append(tuple(active))
        return out

    def append(self, level):
        return MmfGraph(self.m, self.k, self.levels + (level,))

    def relabel(self, perm):
        """Map every index ``i`` to ``perm[i]``; ``perm`` must be a permutation of ``[0, m)``."""
        perm = [int(p) for p in perm]
        if sorted(perm) != list(range(self.m)):
            raise ValueError("relabel expects a permutation of range(m)")
        levels = tuple(
            LevelRecord(
                KPointRotation([perm[i] for i in lv.indices], lv.rotation.block),
                lv.level_error,
            )
            for lv in self.levels
        )
        return MmfGraph(self.m, self.k, levels)


@dataclass(frozen=True)
class MmfConfig:
    """Parameters shared by the batch and incremental factorizers.

    ``n_levels="max"`` means ``m - k + 1``. ``literal_eq6`` switches the
    correlation heuristic from "largest absolute cosine" to "smallest signed
    cosine". ``correlation_samples`` limits how many anchor indices the
    correlation heuristic scans (None scans the whole active set).
    """

    k: int = 3
    n_levels: object = "max"
    variant: str = "exhaustive"
    dict_size: int = 50
    seed: int = 0
    init_fraction: float = 0.1
    sym_tol: float = DEFAULT_SYM_TOL
    orth_tol: float = DEFAULT_ORTH_TOL
    literal_eq6: bool = False
    correlation_samples: object = None
    tuple_budget: int = 20_000
    insert_order: str = "natural"
    check_invariants: bool = False

    def __post_init__(self):
        if not 2 <= int(self.k) <= MAX_ORDER:
            raise ValueError(f"k must be in [2, {MAX_ORDER}], got {self.k}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if int(self.dict_size) < 0:
            raise ValueError(f"dict_size must be nonnegative, got {self.dict_size}")
        if not 0.0 < float(self.init_fraction) <= 1.0:
            raise ValueError(f"init_fraction must be in (0, 1], got {self.init_fraction}")
        if self.insert_order not in ("natural", "shuffle"):
            raise ValueError(f"insert_order must be 'natural' or 'shuffle', got {self.insert_order!r}")
        if self.n_levels != "max" and int(self.n_levels) < 0:
            raise ValueError(f"n_levels must be 'max' or a nonnegative int, got {self.n_levels}")

    @property
    def rotation_mode(self):
        """Which rotation candidates a tuple is optimized over."""
        if self.variant == "eigen":
            return "eigen"
        return "both" if self.dict_size > 0 else "eigen"

    def resolve_levels(self, m):
        if m < self.k:
            raise ValueError(f"matrix dimension {m} is smaller than the rotation order {self.k}")
        max_levels = m - self.k + 1
        if self.n_levels == "max":
            return max_levels
        L = int(self.n_levels)
        if L > max_levels:
            raise ValueError(f"n_levels={L} exceeds m - k + 1 = {max_levels}")
        return L

    def with_(self, **changes):
        return replace(self, **changes)


def _check_dim(C, graph):
    C = np.asarray(C, dtype=np.float64)
    if C.shape != (graph.m, graph.m):
        raise ValueError(f"matrix has shape {C.shape}, graph expects ({graph.m}, {graph.m})")
    return C


def compress(C, graph, upto=None):
    """Apply the first ``upto`` rotations (all by default) to ``C``."""
    A = np.array(_check_dim(C, graph), dtype=np.float64)
    for lv in graph.levels[:upto]:
        _rotate_inplace(A, np.asarray(lv.indices), lv.rotation.block)
    return A


def reconstruct(graph, C_final):
    """Return ``Qbar^T R Qbar`` with ``R`` the core-diagonal part of ``C_final``."""
    R = core_diag(_check_dim(C_final, graph), graph.core_set)
    for lv in reversed(graph.levels):
        _rotate_inplace(R, np.asarray(lv.indices), lv.rotation.block.T)
    return R


def factorization_error(C, graph):
    """Frobenius error of the factorization and the recorded per-level terms.

    Returns
    -------
    frob_error : float
        ``||C - MMF(C)||_F`` by direct subtraction.
    per_level : ndarray
        Recorded level errors; their sum equals ``frob_error ** 2``.
    """
    C = _check_dim(C, graph)
    diff = C - reconstruct(graph, compress(C, graph))
    return float(np.linalg.norm(diff)), graph.level_errors


def offcore_error(C, graph):
    """``off_core_diag_sqnorm`` of the final compression (the squared error)."""
    return off_core_diag_sqnorm(compress(C, graph), graph.core_set)


def error_identity(C, graph):
    """The three computations of the squared error and their disagreement.

    Returns
    -------
    direct : float
        ``||C - MMF(C)||_F^2`` by subtraction.
    level_sum : float
        Sum of the recorded level errors.
    offcore : float
        Off-core norm of the final compression.
    rel_diff : float
        Largest pairwise difference divided by ``max(direct, 1e-16 ||C||_F^2)``;
        the floor keeps exact factorizations from dividing roundoff by zero.
    """
    C = _check_dim(C, graph)
    A = compress(C, graph)
    direct = float(np.sum((C - reconstruct(graph, A)) ** 2))
    level_sum = float(np.sum(graph.level_errors))
    offcore = off_core_diag_sqnorm(A, graph.core_set)
    vals = (direct, level_sum, offcore)
    denom = max(direct, 1e-16 * float(np.sum(C * C)), np.finfo(float).tiny)
    return direct, level_sum, offcore, (max(vals) - min(vals)) / denom


def residual_row_norms(C, graph):
    """Euclidean norm of each row of ``C - MMF(C)``."""
    C = _check_dim(C, graph)
    diff = C - reconstruct(graph, compress(C, graph))
    return np.linalg.norm(diff, axis=1)


def wavelet_transform(X, graph):
    """Coefficients ``X @ Qbar^T`` of the rows of ``X`` in the factorization basis."""
    X = np.array(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != graph.m:
        raise ValueError(f"X must have {graph.m} columns, got shape {X.shape}")
    for lv in graph.levels:
        idx = np.asarray(lv.indices)
        X[:, idx] = X[:, idx] @ lv.rotation.block.T
    return X


def inverse_wavelet_transform(W, graph):
    """Inverse of :func:`wavelet_transform`."""
    W = np.array(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] != graph.m:
        raise ValueError(f"W must have {graph.m} columns, got shape {W.shape}")
    for lv in reversed(graph.levels):
        idx = np.asarray(lv.indices)
        W[:, idx] = W[:, idx] @ lv.rotation.block
    return W
