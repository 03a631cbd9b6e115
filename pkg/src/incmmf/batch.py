"""Greedy batch factorization.

Every level picks a k-tuple ``t``, an orthogonal block ``O`` and a wavelet
``s in t`` minimizing the level's contribution to the squared Frobenius error::

    err = 2 * sum_{i != s} [O C_tt O^T]_{s,i}^2 + 2 * [O B B^T O^T]_{s,s}

where ``B`` holds the rows ``t`` of the current compression against the active
columns outside ``t``. Candidates are compared on
``(error, sorted tuple, wavelet index, rotation index)``, with errors that
differ by less than ``TIE_RTOL * ||C_active||_F^2`` treated as equal, so that
exact ties are resolved by the index order rather than by roundoff.
"""

from dataclasses import dataclass
from itertools import combinations, islice
from math import comb

import numpy as np

from ._validation import DEFAULT_ORTH_TOL, as_generator, check_orthogonal, check_symmetric_matrix
from .graph import LevelRecord, MmfConfig, MmfGraph
from .linalg import KPointRotation, _rotate_inplace, sample_orthogonal, sym_eig_batched

__all__ = [
    "LevelChoice",
    "level_error",
    "best_rotation_for_tuple",
    "best_over_tuples",
    "exhaustive_level",
    "correlation_tuple",
    "correlation_candidates",
    "batch_mmf",
    "select_level",
    "evaluate_graph",
    "random_graph",
    "sample_dictionary",
    "rename_wavelet",
]

ROTATION_MODES = ("dictionary", "eigen", "both")
# bounds the (tuples x rotations x k x k) temporaries to a few tens of MB
_CHUNK_ENTRIES = 2_000_000
# relative size below which two candidate errors are considered equal
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class LevelChoice:
    """Selected ``(tuple, rotation, wavelet)`` for one level, wavelet last."""

    indices: tuple
    block: np.ndarray
    error: float

    @property
    def wavelet(self):
        return self.indices[-1]

    def rotation(self, orth_tol=DEFAULT_ORTH_TOL):
        return KPointRotation(self.indices, self.block, orth_tol)

    def to_level(self, orth_tol=DEFAULT_ORTH_TOL):
        return LevelRecord(self.rotation(orth_tol), self.error)


def level_error(C_prev, active, O, t, orth_tol=DEFAULT_ORTH_TOL):
    """Contribution of one level to the squared error, wavelet at ``t[-1]``.

    Parameters
    ----------
    C_prev : array-like of shape (m, m)
        Current compression.
    active : iterable of int
        Active set before this level.
    O : array-like of shape (k, k)
        Orthogonal block aligned with ``t``.
    t : sequence of int
        The k-tuple, wavelet in the last position.
    """
    C = np.asarray(C_prev, dtype=np.float64)
    t = [int(i) for i in t]
    active = set(int(i) for i in active)
    if len(set(t)) != len(t):
        raise ValueError(f"tuple has repeated indices: {t}")
    missing = [i for i in t if i not in active]
    if missing:
        raise ValueError(f"tuple indices {missing} are not in the active set")
    O = check_orthogonal(O, orth_tol)
    if O.shape[0] != len(t):
        raise ValueError(f"block is {O.shape[0]}x{O.shape[0]} but tuple has {len(t)} entries")
    rest = sorted(active.difference(t))
    X = O @ C[np.ix_(t, t)] @ O.T
    y = O[-1] @ C[np.ix_(t, rest)] if rest else np.zeros(0)
    return float(2.0 * np.sum(X[-1, :-1] ** 2) + 2.0 * (y @ y))


def _align_rows(O):
    """Permute the rows of each block so that row ``j`` leans towards coordinate ``j``.

    Greedy assignment on ``|O|``: the largest remaining entry ``(i, j)`` sends
    row ``i`` to position ``j``. This fixes which tuple index carries which
    rotated coordinate, i.e. which index is named the wavelet.
    """
    O = np.asarray(O)
    T, k, _ = O.shape
    A = np.abs(O).copy()
    perm = np.empty((T, k), dtype=int)
    ar = np.arange(T)
    for _ in range(k):
        flat = A.reshape(T, -1).argmax(axis=1)
        i, j = np.divmod(flat, k)
        perm[ar, j] = i
        A[ar, i, :] = -1.0
        A[ar, :, j] = -1.0
    return O[ar[:, None], perm]


def sample_dictionary(k, dict_size, rng):
    """``dict_size`` Haar rotations with rows aligned; shape ``(dict_size, k, k)``."""
    if dict_size <= 0:
        return np.zeros((0, k, k))
    return _align_rows(sample_orthogonal(k, rng, size=dict_size))


def _wavelet_errors(Ctt, G, O):
    """Errors for every rotation and wavelet row.

    ``Ctt``, ``G``: ``(T, k, k)``; ``O``: ``(T, R, k, k)`` per-tuple blocks or
    ``(R, k, k)`` shared by all tuples. Returns ``(T, R, k)``, entry ``r``
    naming row ``r`` of the block as wavelet.
    """
    T, k, _ = Ctt.shape
    if O.ndim == 3:
        # shared blocks: both quadratic forms become one GEMM against vec(Ctt), vec(G)
        R = O.shape[0]
        W = np.einsum("dra,dib->abdri", O, O).reshape(k * k, R * k * k)
        X = (Ctt.reshape(T, k * k) @ W).reshape(T, R, k, k)
        Wd = np.einsum("dra,drb->abdr", O, O).reshape(k * k, R * k)
        second = (G.reshape(T, k * k) @ Wd).reshape(T, R, k)
    else:
        X = (O @ Ctt[:, None]) @ np.swapaxes(O, -1, -2)
        second = np.sum((O @ G[:, None]) * O, axis=-1)
    # exact symmetry and a direct off-diagonal sum, so equal errors compare equal
    S = X + np.swapaxes(X, -1, -2)
    S *= S
    d = np.arange(k)
    S[..., d, d] = 0.0
    first = S.sum(axis=-1) / 4.0
    return np.maximum(2.0 * (first + second), 0.0)


def _eval_chunk(rows, local, mode, dictionary, tie_tol=0.0):
    """Best candidate in a chunk of sorted tuples.

    ``rows``: ``(T, k, n)`` rows of each tuple against the active columns;
    ``local``: ``(T, k)`` column positions of the tuple inside ``rows``.
    Errors within ``tie_tol`` of the minimum count as ties.
    Returns ``(error, tuple_pos, wavelet_row, block)``.
    """
    T, k, _ = rows.shape
    Ctt = np.take_along_axis(rows, local[:, None, :], axis=2)
    Ctt = (Ctt + np.swapaxes(Ctt, 1, 2)) / 2.0
    B = rows.copy()
    np.put_along_axis(B, np.broadcast_to(local[:, None, :], (T, k, k)), 0.0, axis=2)
    G = B @ np.swapaxes(B, 1, 2)

    errs, blocks = [], []
    if mode in ("eigen", "both"):
        _, E = sym_eig_batched(Ctt)
        E = _align_rows(E)
        errs.append(_wavelet_errors(Ctt, G, E[:, None]))
        blocks.append(("eigen", E))
    if mode in ("dictionary", "both") and len(dictionary):
        errs.append(_wavelet_errors(Ctt, G, dictionary))
        blocks.append(("dict", dictionary))
    err = np.concatenate(errs, axis=1)  # (T, R, k)
    # first near-minimum in (tuple, wavelet row, rotation) order
    order = np.transpose(err, (0, 2, 1)).ravel()
    flat = int(np.flatnonzero(order <= order.min() + tie_tol)[0])
    R = err.shape[1]
    t_pos, rem = divmod(flat, k * R)
    row, rot = divmod(rem, R)
    if blocks[0][0] == "eigen":
        block = blocks[0][1][t_pos] if rot == 0 else dictionary[rot - 1]
    else:
        block = dictionary[rot]
    return float(err[t_pos, rot, row]), t_pos, row, block


def tie_tolerance(P):
    """Errors closer than this are ties: ``TIE_RTOL`` times the squared norm of the active block."""
    return TIE_RTOL * float(np.sum(P * P))


def _canonical(t_sorted, block, row):
    """Move the wavelet row/index to the last position, keeping ``Q`` unchanged."""
    k = len(t_sorted)
    perm = [i for i in range(k) if i != row] + [row]
    idx = tuple(int(t_sorted[i]) for i in perm)
    return idx, np.asarray(block)[np.ix_(perm, perm)]


def rename_wavelet(choice, new_wavelet):
    """Same rotation and error, with ``new_wavelet`` (a member of the tuple) as wavelet.

    The wavelet row of the block is kept; only the index carrying it changes,
    so the level error and the set of rotated vectors left active are unchanged.
    """
    idx = list(choice.indices)
    j = idx.index(int(new_wavelet))
    last = len(idx) - 1
    if j == last:
        return choice
    sigma = list(range(len(idx)))
    sigma[j], sigma[last] = last, j
    new_idx = tuple(idx[i] for i in sigma)
    return LevelChoice(new_idx, np.asarray(choice.block)[:, sigma], choice.error)


def _check_mode(mode, dictionary):
    if mode not in ROTATION_MODES:
        raise ValueError(f"mode must be one of {ROTATION_MODES}, got {mode!r}")
    if mode == "dictionary" and len(dictionary) == 0:
        raise ValueError("empty rotation candidate set: dictionary mode with dict_size=0")


def _finish(C, active, best, orth_tol):
    _, t_sorted, row, block = best
    idx, blk = _canonical(t_sorted, block, row)
    err = level_error(C, active, blk, idx, orth_tol)
    return LevelChoice(idx, blk, err)


def best_over_tuples(C_prev, active, tuples, k, mode="both", dict_size=50, rng=None,
                     dictionary=None, orth_tol=DEFAULT_ORTH_TOL):
    """Best level choice over an explicit list of candidate tuples.

    Tuples are treated as sets; duplicates are merged and the list is sorted
    so the tie-break does not depend on the order given.
    """
    C = np.asarray(C_prev, dtype=np.float64)
    act = np.array(sorted(int(i) for i in active), dtype=int)
    if dictionary is None:
        dictionary = sample_dictionary(k, dict_size, as_generator(rng)) if mode != "eigen" else np.zeros((0, k, k))
    _check_mode(mode, dictionary)
    cand = sorted({tuple(sorted(int(i) for i in t)) for t in tuples})
    if not cand:
        raise ValueError("no candidate tuples to evaluate")
    for t in cand:
        if len(t) != k:
            raise ValueError(f"candidate {t} does not have {k} distinct entries")
    tg = np.array(cand, dtype=int)
    local = np.searchsorted(act, tg)
    if np.any(local >= len(act)) or np.any(act[np.minimum(local, len(act) - 1)] != tg):
        raise ValueError("candidate tuples must lie inside the active set")
    rows = C[tg][:, :, act]
    tol = tie_tolerance(C[np.ix_(act, act)])
    err, t_pos, row, block = _eval_chunk(rows, local, mode, dictionary, tol)
    return _finish(C, act, (err, tg[t_pos], row, block), orth_tol)


def best_rotation_for_tuple(C_prev, active, t, mode="both", dict_size=50, rng=None,
                            dictionary=None, orth_tol=DEFAULT_ORTH_TOL):
    """Optimize the rotation and wavelet for a fixed tuple ``t``.

    ``mode`` selects the rotation candidates: ``"dictionary"`` (``dict_size``
    Haar samples), ``"eigen"`` (eigenvectors of ``C_tt``) or ``"both"``.
    Every row of every candidate is tried as the wavelet.
    """
    return best_over_tuples(C_prev, active, [t], len(t), mode, dict_size, rng,
                            dictionary, orth_tol)


def exhaustive_level(C_prev, active, k, mode="both", dict_size=50, rng=None,
                     dictionary=None, orth_tol=DEFAULT_ORTH_TOL):
    """Search every k-subset of ``active``.

    Ties are broken by the smallest error, then the lexicographically smallest
    sorted tuple, then the smallest wavelet index.
    """
    C = np.asarray(C_prev, dtype=np.float64)
    act = np.array(sorted(int(i) for i in active), dtype=int)
    n = len(act)
    if n < k:
        raise ValueError(f"active set has {n} indices, fewer than k={k}")
    if dictionary is None:
        dictionary = sample_dictionary(k, dict_size, as_generator(rng)) if mode != "eigen" else np.zeros((0, k, k))
    _check_mode(mode, dictionary)
    P = C[np.ix_(act, act)]
    n_rot = (1 if mode != "dictionary" else 0) + (len(dictionary) if mode != "eigen" else 0)
    chunk = max(1, _CHUNK_ENTRIES // (k * max(n, k * n_rot)))
    tol = tie_tolerance(P)
    it = combinations(range(n), k)
    best = None
    while True:
        local = np.array(list(islice(it, chunk)), dtype=int)
        if local.size == 0:
            break
        err, t_pos, row, block = _eval_chunk(P[local], local, mode, dictionary, tol)
        if best is None or err < best[0] - tol:
            best = (err, act[local[t_pos]], row, block)
    return _finish(C, act, best, orth_tol)


def _cosines(C, act):
    P = C[np.ix_(act, act)]
    norms = np.linalg.norm(P, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        S = (P.T @ P) / np.outer(norms, norms)
    S[~np.isfinite(S)] = 0.0
    S[norms == 0, :] = 0.0
    S[:, norms == 0] = 0.0
    return S


def _pick_partners(S, anchors_local, k, literal_eq6):
    key = S[anchors_local] if literal_eq6 else -np.abs(S[anchors_local])
    key = key.copy()
    key[np.arange(len(anchors_local)), anchors_local] = np.inf
    order = np.argsort(key, axis=1, kind="stable")[:, : k - 1]
    return order


def correlation_tuple(C_prev, active, s1, k, literal_eq6=False):
    """Anchor ``s1`` plus the ``k - 1`` active columns most correlated with it.

    Cosines are taken over the active coordinates. By default the partners are
    the largest ``|cosine|``; ``literal_eq6`` takes the smallest signed cosine
    instead. Zero columns score 0; ties go to the smaller index.
    """
    C = np.asarray(C_prev, dtype=np.float64)
    act = np.array(sorted(int(i) for i in active), dtype=int)
    if len(act) < k:
        raise ValueError(f"active set has {len(act)} indices, fewer than k={k}")
    pos = np.searchsorted(act, int(s1))
    if pos >= len(act) or act[pos] != int(s1):
        raise ValueError(f"anchor {s1} is not in the active set")
    S = _cosines(C, act)
    partners = _pick_partners(S, np.array([pos]), k, literal_eq6)[0]
    return tuple(sorted([int(s1)] + [int(act[j]) for j in partners]))


def correlation_candidates(C_prev, active, k, anchors=None, literal_eq6=False):
    """Correlation tuples for every anchor in ``anchors`` (all active by default)."""
    C = np.asarray(C_prev, dtype=np.float64)
    act = np.array(sorted(int(i) for i in active), dtype=int)
    if len(act) < k:
        raise ValueError(f"active set has {len(act)} indices, fewer than k={k}")
    S = _cosines(C, act)
    anchors_local = np.arange(len(act)) if anchors is None else np.searchsorted(act, np.asarray(anchors, dtype=int))
    partners = _pick_partners(S, anchors_local, k, literal_eq6)
    return sorted({
        tuple(sorted([int(act[a])] + [int(act[j]) for j in row]))
        for a, row in zip(anchors_local, partners)
    })


def select_level(C, active, config, rng, variant=None):
    """One greedy level with the configured strategy."""
    variant = variant or config.variant
    k = config.k
    if variant == "eigen":
        return exhaustive_level(C, active, k, "eigen", orth_tol=config.orth_tol)
    mode = config.rotation_mode
    dictionary = sample_dictionary(k, config.dict_size, rng) if mode != "eigen" else None
    if variant == "exhaustive":
        return exhaustive_level(C, active, k, mode, dictionary=dictionary, orth_tol=config.orth_tol)
    anchors = None
    if config.correlation_samples is not None:
        act = sorted(active)
        n_s1 = min(int(config.correlation_samples), len(act))
        anchors = sorted(rng.choice(act, size=n_s1, replace=False).tolist())
    tuples = correlation_candidates(C, active, k, anchors, config.literal_eq6)
    return best_over_tuples(C, active, tuples, k, mode, dictionary=dictionary,
                            orth_tol=config.orth_tol)


def batch_mmf(C, config=None, rng=None):
    """Greedy batch factorization.

    Parameters
    ----------
    C : array-like of shape (m, m)
        Symmetric input.
    config : MmfConfig
    rng : numpy Generator, optional
        Defaults to ``default_rng(config.seed)``.

    Returns
    -------
    graph : MmfGraph
    C_final : ndarray of shape (m, m)
        The last compression ``C^L``.
    """
    config = config or MmfConfig()
    A = check_symmetric_matrix(C, config.sym_tol)
    m = A.shape[0]
    L = config.resolve_levels(m)
    rng = as_generator(config.seed if rng is None else rng)
    active = list(range(m))
    levels = []
    for _ in range(L):
        choice = select_level(A, active, config, rng)
        _rotate_inplace(A, np.asarray(choice.indices), choice.block)
        levels.append(choice.to_level(config.orth_tol))
        active.remove(choice.wavelet)
    return MmfGraph(m, config.k, levels), A


def evaluate_graph(C, graph, orth_tol=DEFAULT_ORTH_TOL):
    """Recompute every level error of a fixed ``graph`` on ``C``.

    Returns the re-scored graph and the final compression.
    """
    A = np.array(C, dtype=np.float64)
    if A.shape != (graph.m, graph.m):
        raise ValueError(f"matrix has shape {A.shape}, graph expects ({graph.m}, {graph.m})")
    active = list(range(graph.m))
    levels = []
    for lv in graph.levels:
        err = level_error(A, active, lv.rotation.block, lv.indices, orth_tol)
        _rotate_inplace(A, np.asarray(lv.indices), lv.rotation.block)
        levels.append(LevelRecord(lv.rotation, err))
        active.remove(lv.wavelet)
    return MmfGraph(graph.m, graph.k, levels), A


def random_graph(m, k, n_levels, rng, C=None):
    """A graph with random tuples on nested active sets and Haar blocks.

    Level errors are evaluated on ``C`` when given, otherwise left at 0.
    """
    rng = as_generator(rng)
    if n_levels > m - k + 1:
        raise ValueError(f"n_levels={n_levels} exceeds m - k + 1 = {m - k + 1}")
    active = list(range(m))
    levels = []
    for _ in range(n_levels):
        t = [int(i) for i in rng.choice(active, size=k, replace=False)]
        block = sample_orthogonal(k, rng)
        levels.append(LevelRecord(KPointRotation(t, block), 0.0))
        active.remove(t[-1])
    graph = MmfGraph(m, k, levels)
    if C is not None:
        graph, _ = evaluate_graph(C, graph)
    return graph


def tuple_count(n, k):
    return comb(n, k)
