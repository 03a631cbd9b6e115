"""Dense kernels: symmetric storage, k-point rotations, small eigensolver,
Haar-distributed orthogonal sampling."""

from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    DEFAULT_ORTH_TOL,
    DEFAULT_SYM_TOL,
    MAX_ORDER,
    ConvergenceError,
    check_index_set,
    check_orthogonal,
    check_symmetric_matrix,
)

__all__ = [
    "SymMatrix",
    "KPointRotation",
    "apply_rotation",
    "sym_eig_small",
    "sym_eig_batched",
    "sample_orthogonal",
    "off_core_diag_sqnorm",
    "core_diag",
]

JACOBI_MAX_SWEEPS = 60
_JACOBI_TOL = 1e-14


@dataclass(frozen=True)
class SymMatrix:
    """A dense symmetric matrix with optional row/column labels.

    Both triangles are stored. Construction validates symmetry against
    ``sym_tol`` (relative, floored at 1) unless ``symmetrize`` is set, in which
    case the matrix is averaged with its transpose.
    """

    values: np.ndarray
    labels: tuple = None
    sym_tol: float = field(default=DEFAULT_SYM_TOL, repr=False)
    symmetrize: bool = field(default=False, repr=False)

    def __post_init__(self):
        values = check_symmetric_matrix(self.values, self.sym_tol, self.symmetrize)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != values.shape[0]:
                raise ValueError(
                    f"got {len(labels)} labels for a {values.shape[0]}x{values.shape[0]} matrix"
                )
            object.__setattr__(self, "labels", labels)

    @property
    def dim(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def label_list(self):
        """Labels, falling back to the 0-based index as a string."""
        if self.labels is None:
            return [str(i) for i in range(self.dim)]
        return list(self.labels)


@dataclass(frozen=True)
class KPointRotation:
    """Orthogonal matrix equal to the identity outside ``indices``.

    ``block[a, b]`` is the entry at row ``indices[a]``, column ``indices[b]``.
    """

    indices: tuple
    block: np.ndarray
    orth_tol: float = field(default=DEFAULT_ORTH_TOL, repr=False, compare=False)

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        if len(set(indices)) != len(indices):
            raise ValueError(f"rotation indices must be distinct, got {indices}")
        if min(indices, default=0) < 0:
            raise ValueError(f"rotation indices must be nonnegative, got {indices}")
        block = np.array(self.block, dtype=np.float64)
        if block.shape != (len(indices), len(indices)):
            raise ValueError(
                f"block shape {block.shape} does not match {len(indices)} indices"
            )
        check_orthogonal(block, self.orth_tol)
        block.setflags(write=False)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "block", block)

    @property
    def k(self):
        return len(self.indices)

    def inverse(self):
        return KPointRotation(self.indices, self.block.T, self.orth_tol)

    def dense(self, m):
        """The full ``m x m`` orthogonal matrix."""
        Q = np.eye(m)
        idx = np.asarray(self.indices)
        Q[np.ix_(idx, idx)] = self.block
        return Q


def _rotate_inplace(A, idx, O):
    """``A <- Q A Q^T`` for the k-point rotation ``(idx, O)``, keeping exact symmetry."""
    rows = O @ A[idx, :]
    rows[:, idx] = rows[:, idx] @ O.T
    blk = rows[:, idx]
    rows[:, idx] = (blk + blk.T) / 2.0
    A[idx, :] = rows
    A[:, idx] = rows.T


def apply_rotation(C, rot):
    """Return ``Q C Q^T`` where ``Q`` is the k-point rotation ``rot``.

    Only the rows and columns listed in ``rot.indices`` change.
    """
    A = np.array(C, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    idx = np.asarray(check_index_set(rot.indices, A.shape[0], "rotation indices"))
    _rotate_inplace(A, idx, rot.block)
    return A


def sym_eig_batched(A, max_sweeps=JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi eigendecomposition of a stack of small symmetric matrices.

    Parameters
    ----------
    A : ndarray of shape (T, k, k)

    Returns
    -------
    w : ndarray of shape (T, k)
        Eigenvalues, descending.
    E : ndarray of shape (T, k, k)
        Eigenvectors as rows, so ``E[t] @ A[t] @ E[t].T`` is diagonal. The entry
        of largest magnitude in each row is nonnegative (ties: lowest index).
    """
    A = np.array(A, dtype=np.float64)
    T, k, _ = A.shape
    V = np.broadcast_to(np.eye(k), A.shape).copy()
    scale = np.sqrt(np.einsum("tij,tij->t", A, A))
    offmask = ~np.eye(k, dtype=bool)
    pairs = [(p, q) for p in range(k - 1) for q in range(p + 1, k)]
    for sweep in range(max_sweeps + 1):
        off = np.sqrt((A[:, offmask] ** 2).sum(axis=1))
        if np.all(off <= _JACOBI_TOL * scale):
            break
        if sweep == max_sweeps:
            raise ConvergenceError(
                f"Jacobi iteration did not converge after {max_sweeps} sweeps "
                f"(max off-diagonal norm {off.max():.3e})"
            )
        for p, q in pairs:
            apq = A[:, p, q]
            nz = apq != 0.0
            if not nz.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                theta = np.where(nz, (A[:, q, q] - A[:, p, p]) / (2.0 * apq), 0.0)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(nz, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            cc, ss = c[:, None], s[:, None]
            Ap, Aq = A[:, :, p].copy(), A[:, :, q].copy()
            A[:, :, p] = cc * Ap - ss * Aq
            A[:, :, q] = ss * Ap + cc * Aq
            Ap, Aq = A[:, p, :].copy(), A[:, q, :].copy()
            A[:, p, :] = cc * Ap - ss * Aq
            A[:, q, :] = ss * Ap + cc * Aq
            A[nz, p, q] = 0.0
            A[nz, q, p] = 0.0
            Vp, Vq = V[:, :, p].copy(), V[:, :, q].copy()
            V[:, :, p] = cc * Vp - ss * Vq
            V[:, :, q] = ss * Vp + cc * Vq
    w = np.diagonal(A, axis1=1, axis2=2)
    order = np.argsort(-w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    E = np.take_along_axis(V, order[:, None, :], axis=2).transpose(0, 2, 1)
    lead = np.argmax(np.abs(E), axis=2)
    sign = np.where(np.take_along_axis(E, lead[..., None], axis=2) < 0, -1.0, 1.0)
    return w, E * sign


def sym_eig_small(A, sym_tol=DEFAULT_SYM_TOL):
    """Eigendecomposition of one small symmetric matrix (``k <= 16``).

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues descending and
    eigenvectors stored as rows; see :func:`sym_eig_batched` for the sign rule.
    """
    A = check_symmetric_matrix(A, sym_tol)
    if A.shape[0] > MAX_ORDER:
        raise ValueError(f"sym_eig_small handles k <= {MAX_ORDER}, got {A.shape[0]}")
    w, E = sym_eig_batched(A[None])
    return w[0], E[0]


def sample_orthogonal(k, rng, size=None):
    """Draw Haar-distributed ``k x k`` orthogonal matrices.

    QR of a standard Gaussian matrix, with columns of ``Q`` multiplied by the
    signs of ``diag(R)`` (zeros count as positive). ``size`` stacks samples
    along a leading axis.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    shape = (k, k) if size is None else (int(size), k, k)
    Z = rng.standard_normal(shape)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    sign = np.where(d < 0, -1.0, 1.0)
    return Q * sign[..., None, :]


def core_diag(C, core):
    """Keep the diagonal and the ``core x core`` block of ``C``; zero the rest."""
    C = np.asarray(C, dtype=np.float64)
    idx = np.asarray(check_index_set(core, C.shape[0], "core"), dtype=int)
    R = np.diag(np.diag(C))
    if idx.size:
        R[np.ix_(idx, idx)] = C[np.ix_(idx, idx)]
    return R


def off_core_diag_sqnorm(C, core):
    """Squared Frobenius norm of ``C`` outside its diagonal and core block."""
    C = np.asarray(C, dtype=np.float64)
    idx = np.asarray(check_index_set(core, C.shape[0], "core"), dtype=int)
    mask = ~np.eye(C.shape[0], dtype=bool)
    if idx.size:
        mask[np.ix_(idx, idx)] = False
    return float(np.sum(C[mask] ** 2))
