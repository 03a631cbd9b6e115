"""Incremental factorization: extend an existing graph one row/column at a time.

Inserting a row re-uses the old graph's tuples as the default choice at every
level and only considers the handful of alternatives obtained by swapping in
indices that are active in the new factorization but were retired (or did not
exist) in the old one. The insert set ``z`` tracks exactly those indices.
"""

from itertools import combinations
from math import comb
from typing import NamedTuple

import numpy as np

from ._validation import as_generator, check_symmetric_matrix
from .batch import (
    best_over_tuples,
    batch_mmf,
    exhaustive_level,
    rename_wavelet,
    sample_dictionary,
    select_level,
)
from .graph import MmfConfig, MmfGraph
from .linalg import _rotate_inplace

__all__ = [
    "CandidateTuple",
    "InsertionInvariantError",
    "extend_matrix",
    "generate_tuples",
    "check_insert",
    "insert_row",
    "incremental_mmf",
    "initial_size",
]


class InsertionInvariantError(AssertionError):
    """Insert-set bookkeeping disagreed with a recomputation from the active sets."""


class CandidateTuple(NamedTuple):
    indices: tuple
    provenance: str  # "old-graph" or "swap-in"


def extend_matrix(C, w):
    """Border ``C`` with the column ``w = [u, v]`` (``len(w) == m + 1``)."""
    C = np.asarray(C, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64).ravel()
    m = C.shape[0]
    if w.shape != (m + 1,):
        raise ValueError(f"new column must have {m + 1} entries, got {w.shape[0]}")
    out = np.empty((m + 1, m + 1))
    out[:m, :m] = C
    out[m, :] = w
    out[:, m] = w
    return out


def generate_tuples(t_hat, z, stale=()):
    """Candidate tuples for one level of an insertion.

    Slots of ``t_hat`` holding ``stale`` indices must be refilled from ``z``.
    For every such filling, the filled tuple itself and every single swap of a
    remaining ``z`` element into one of the surviving slots are candidates. In
    the common case (nothing stale, ``z = {new}``) that is ``t_hat`` plus ``k``
    swaps.
    """
    t_hat = tuple(int(i) for i in t_hat)
    stale = set(int(i) for i in stale)
    z_sorted = sorted(int(i) for i in z)
    vacant = [p for p, i in enumerate(t_hat) if i in stale]
    kept = [p for p, i in enumerate(t_hat) if i not in stale]
    if len(z_sorted) < len(vacant):
        raise ValueError(
            f"insert set {z_sorted} is too small to refill stale indices "
            f"{sorted(stale & set(t_hat))}; the insertion state is corrupt"
        )
    out = []
    for fill in combinations(z_sorted, len(vacant)):
        base = list(t_hat)
        for p, i in zip(vacant, fill):
            base[p] = i
        out.append(CandidateTuple(tuple(base), "swap-in" if vacant else "old-graph"))
        for extra in (i for i in z_sorted if i not in fill):
            for p in kept:
                cand = list(base)
                cand[p] = extra
                out.append(CandidateTuple(tuple(cand), "swap-in"))
    return out


def check_insert(A, active, t_hat, s_hat, z, config, rng=None, dictionary=None):
    """Re-decide one level of the old graph on the extended compression ``A``.

    Parameters
    ----------
    A : ndarray
        Current compression of the extended matrix.
    active : set of int
        Active set of the extended factorization before this level.
    t_hat, s_hat : tuple, int
        The old level's tuple and wavelet.
    z : set of int
        Insert set before this level.

    Returns
    -------
    t_tilde : tuple
        Chosen tuple, wavelet last.
    s_tilde : int
    z_next : set of int
    choice : LevelChoice
        Includes the rotation block and the recorded level error.
    """
    active = set(active)
    z = set(z)
    stale = set(t_hat) - active
    cands = generate_tuples(t_hat, z, stale)
    mode = config.rotation_mode
    if dictionary is None and mode != "eigen":
        dictionary = sample_dictionary(config.k, config.dict_size,
                                       as_generator(config.seed if rng is None else rng))
    choice = best_over_tuples(A, active, [c.indices for c in cands], config.k, mode,
                              dictionary=dictionary, orth_tol=config.orth_tol)
    # the wavelet's name within the tuple is free; keep the old one, else knock out an inserted index
    if s_hat in choice.indices:
        choice = rename_wavelet(choice, s_hat)
    else:
        inserted = sorted(z.intersection(choice.indices))
        if inserted:
            choice = rename_wavelet(choice, inserted[0])
    s_tilde = choice.wavelet
    # old side retires s_hat, new side retires s_tilde
    z_next = (z | ({s_hat} & active)) - {s_tilde}
    return choice.indices, s_tilde, z_next, choice


def _final_level(A, active, config, rng):
    n = len(active)
    if comb(n, config.k) <= config.tuple_budget:
        mode = config.rotation_mode
        dictionary = sample_dictionary(config.k, config.dict_size, rng) if mode != "eigen" else None
        return exhaustive_level(A, active, config.k, mode, dictionary=dictionary,
                                orth_tol=config.orth_tol)
    return select_level(A, active, config, rng, variant="correlation-greedy")


def _insert(C, w, graph, config, rng, append_level, trace):
    Ct = extend_matrix(C, w)
    m = graph.m
    A = Ct.copy()
    new_active = set(range(m + 1))
    old_active = set(range(m))
    z = {m}
    levels = []
    for num, lv in enumerate(graph.levels, start=1):
        if config.check_invariants:
            _check_bookkeeping(num, new_active, old_active, z)
        if trace is not None:
            trace.append({"level": num, "z_size": len(z), "new_active": len(new_active),
                          "old_active": len(old_active)})
        _, s_tilde, z, choice = check_insert(A, new_active, lv.indices, lv.wavelet, z, config, rng)
        _rotate_inplace(A, np.asarray(choice.indices), choice.block)
        levels.append(choice.to_level(config.orth_tol))
        new_active.discard(s_tilde)
        old_active.discard(lv.wavelet)
    if config.check_invariants:
        _check_bookkeeping(graph.n_levels + 1, new_active, old_active, z)
    if append_level:
        choice = _final_level(A, sorted(new_active), config, rng)
        _rotate_inplace(A, np.asarray(choice.indices), choice.block)
        levels.append(choice.to_level(config.orth_tol))
    return MmfGraph(m + 1, graph.k, levels), A


def _check_bookkeeping(level, new_active, old_active, z):
    if len(new_active) != len(old_active) + 1:
        raise InsertionInvariantError(
            f"level {level}: |new active| = {len(new_active)} but |old active| = {len(old_active)}"
        )
    expected = new_active - old_active
    if expected != z:
        raise InsertionInvariantError(
            f"level {level}: insert set {sorted(z)} != new active - old active {sorted(expected)}"
        )


def insert_row(C, w, graph, config=None, rng=None, append_level=True, trace=None):
    """Factorization of ``C`` bordered by ``w`` from a factorization of ``C``.

    Every old level is re-decided with :func:`check_insert`; then, if
    ``append_level``, one new level is chosen over what remains active (an
    exhaustive search when at most ``config.tuple_budget`` tuples, otherwise the
    correlation heuristic).

    Returns
    -------
    MmfGraph
        ``graph.n_levels + 1`` levels over ``m + 1`` indices.
    """
    config = config or MmfConfig(k=graph.k)
    if config.k != graph.k:
        raise ValueError(f"config order k={config.k} does not match graph order k={graph.k}")
    C = check_symmetric_matrix(C, config.sym_tol)
    if C.shape[0] != graph.m:
        raise ValueError(f"matrix is {C.shape[0]}x{C.shape[0]}, graph expects m={graph.m}")
    rng = as_generator(config.seed if rng is None else rng)
    new_graph, _ = _insert(C, w, graph, config, rng, append_level, trace)
    return new_graph


def initial_size(m, config):
    """Size of the leading block that is factorized in batch."""
    m0 = max(config.k, int(np.floor(config.init_fraction * m + 0.5)))
    if m0 > m:
        raise ValueError(f"matrix dimension {m} is smaller than the rotation order {config.k}")
    return m0


def incremental_mmf(C, config=None, rng=None, trace=None):
    """Batch-factorize a leading block, then insert the remaining rows one by one.

    With ``insert_order="shuffle"`` the rows are visited in a seeded random
    order and the resulting graph is relabeled back to the original indices.

    Returns
    -------
    MmfGraph
    """
    config = config or MmfConfig()
    C = check_symmetric_matrix(C, config.sym_tol)
    m = C.shape[0]
    L = config.resolve_levels(m)
    rng = as_generator(config.seed if rng is None else rng)
    perm = None
    if config.insert_order == "shuffle":
        perm = rng.permutation(m)
        C = C[np.ix_(perm, perm)]
    m0 = initial_size(m, config)
    L0 = min(L, m0 - config.k + 1)
    graph, _ = batch_mmf(C[:m0, :m0], config.with_(n_levels=L0), rng)
    for j in range(m0, m):
        graph, _ = _insert(C[:j, :j], C[j, : j + 1], graph, config, rng,
                           append_level=graph.n_levels < L, trace=trace)
    if perm is not None:
        graph = graph.relabel(perm)
    return graph
