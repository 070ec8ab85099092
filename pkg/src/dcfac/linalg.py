"""Small linear-algebra kernels used by the factorized solver.

Coefficient matrices are stored as :class:`scipy.sparse.csr_matrix` holding
the full symmetric pattern (both triangles). Factor matrices ``V`` are dense
``(m, p)`` float64 arrays with ``m`` small (at most 50 by default) and ``p``
possibly in the tens of thousands, so every spectral quantity of ``V`` is
computed on the ``m x m`` Gram matrix ``V V^T``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

__all__ = [
    "SingularTriple",
    "as_sparse_sym",
    "symm_matvec",
    "dense_times_sparse",
    "leading_singular_triple",
    "spectral_norm",
    "frobenius_norm",
]

# Below this dimension the spectral norm is taken from a dense eigensolve.
_DENSE_EIG_MAX_DIM = 600


@dataclass(frozen=True)
class SingularTriple:
    """Leading singular value of ``V`` with its unit singular vectors.

    ``ratio`` is ``sigma_2 / sigma_1``; a value close to one means the
    leading singular space is (numerically) degenerate and ``right`` is only
    one valid choice among many.
    """

    sigma: float
    left: np.ndarray
    right: np.ndarray
    ratio: float = 0.0
    converged: bool = True


def as_sparse_sym(C, *, check=True, atol=0.0):
    """Return ``C`` as a canonical float64 CSR matrix.

    Duplicates are summed and column indices sorted. With ``check`` the
    pattern and values must be symmetric up to ``atol``.
    """
    if sp.issparse(C):
        M = sp.csr_matrix(C, dtype=np.float64, copy=True)
    else:
        arr = np.asarray(C, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("coefficient matrix must be two-dimensional")
        M = sp.csr_matrix(arr)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"coefficient matrix must be square, got {M.shape}")
    M.sum_duplicates()
    M.eliminate_zeros()
    M.sort_indices()
    if not np.all(np.isfinite(M.data)):
        raise ValueError("coefficient matrix has non-finite entries")
    if check:
        diff = abs(M - M.T)
        if diff.nnz and diff.max() > atol:
            raise ValueError("coefficient matrix is not symmetric")
    return M


def symm_matvec(C, x):
    """Product ``C @ x`` for a sparse symmetric ``C``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != C.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix is {C.shape[0]}, vector has shape {x.shape}")
    return C @ x


def dense_times_sparse(V, C):
    """Return ``V @ C`` for dense ``V`` (m x p) and symmetric sparse ``C``."""
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] != C.shape[0]:
        raise ValueError(
            f"dimension mismatch: V has shape {V.shape}, C is {C.shape[0]}x{C.shape[1]}")
    # C is symmetric, so V C = (C V^T)^T; CSR times dense block is the fast path.
    return np.ascontiguousarray((C @ V.T).T)


def leading_singular_triple(V):
    """Leading singular triple of a dense ``m x p`` matrix.

    The ``m x m`` Gram matrix ``V V^T`` is formed once and diagonalized;
    the right vector is recovered as ``V^T u / sigma``. Signs are fixed so
    that the largest-magnitude entry of ``left`` is positive, which keeps
    repeated calls bit-for-bit deterministic.
    """
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2:
        raise ValueError("V must be a matrix")
    gram = V @ V.T
    evals, evecs = np.linalg.eigh(gram)
    lam1 = evals[-1]
    if not lam1 > 0.0:
        raise ValueError("leading singular triple of a zero matrix is undefined")
    u = evecs[:, -1]
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    sigma = float(np.sqrt(lam1))
    right = (V.T @ u) / sigma
    # renormalize against round-off in sigma
    right /= np.linalg.norm(right)
    lam2 = evals[-2] if evals.shape[0] > 1 else 0.0
    ratio = float(np.sqrt(max(lam2, 0.0) / lam1))
    return SingularTriple(sigma=sigma, left=u, right=right, ratio=ratio)


def spectral_norm(C):
    """Largest absolute eigenvalue of a symmetric matrix.

    Small matrices go through a dense eigensolve; large ones through ARPACK
    Lanczos from a fixed-seed Gaussian start vector, so the result is
    deterministic. (The all-ones vector is useless as a start: it lies in the
    kernel of every max-cut coefficient matrix.)
    """
    if sp.issparse(C):
        if C.nnz == 0 or not np.any(C.data):
            return 0.0
        n = C.shape[0]
        if n <= _DENSE_EIG_MAX_DIM:
            return float(np.max(np.abs(np.linalg.eigvalsh(C.toarray()))))
        v0 = np.random.default_rng(0x5EED).standard_normal(n)
        try:
            vals = eigsh(C, k=1, which="LM", v0=v0, tol=1e-12,
                         return_eigenvectors=False, maxiter=20 * n)
        except ArpackNoConvergence as exc:
            vals = exc.eigenvalues
        return float(np.max(np.abs(vals)))
    arr = np.asarray(C, dtype=np.float64)
    if arr.size == 0 or not np.any(arr):
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(arr))))


def frobenius_norm(C):
    if sp.issparse(C):
        return float(np.sqrt(np.sum(C.data ** 2)))
    return float(np.linalg.norm(np.asarray(C, dtype=np.float64)))
