"""Matrix primitives shared by every estimator.

Conventions
-----------
* ``vec`` stacks columns (Fortran order): ``vec(A)[i + m*j] == A[i, j]``.
* Sample covariances divide by ``n``, not ``n - 1``.
* The diagonal of a partial-correlation matrix is set to 1; only the
  off-diagonal entries carry meaning.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDiagonal, SingularCovariance, ZeroVariance, DataError

__all__ = [
    "DataMatrix",
    "CovMatrix",
    "PrecisionMatrix",
    "PartialCorrMatrix",
    "CommutationMatrix",
    "MatrixNorms",
    "vec",
    "unvec",
    "commutation_matrix",
    "kronecker",
    "sample_covariance",
    "precision",
    "partial_correlations",
    "sample_correlations",
    "norms",
    "pair_indices",
    "offdiag",
]


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _symmetrize(a):
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class DataMatrix:
    """An ``n x D`` matrix of observations, one row per sample."""

    values: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        values = _readonly(self.values)
        if values.ndim != 2:
            raise DataError(f"data must be two-dimensional, got shape {values.shape}")
        n, D = values.shape
        if n < 2 or D < 2:
            raise DataError(f"need at least 2 rows and 2 columns, got {n}x{D}")
        if not np.all(np.isfinite(values)):
            raise DataError("data contain non-finite entries")
        labels = tuple(str(x) for x in self.labels) or tuple(
            str(j + 1) for j in range(D)
        )
        if len(labels) != D:
            raise DataError(f"{len(labels)} labels given for {D} columns")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def D(self):
        return self.values.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class CovMatrix:
    """A symmetric ``D x D`` covariance matrix (symmetrized on construction)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DataError(f"covariance must be square, got shape {v.shape}")
        object.__setattr__(self, "values", _readonly(_symmetrize(v)))

    @property
    def D(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class PrecisionMatrix:
    """Inverse of a covariance matrix.

    ``source_min_eigenvalue`` is the smallest eigenvalue of the matrix
    that was inverted.
    """

    values: np.ndarray
    source_min_eigenvalue: float

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(_symmetrize(np.asarray(self.values))))

    @property
    def D(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class PartialCorrMatrix:
    """Symmetric matrix of (partial) correlations with unit diagonal."""

    values: np.ndarray

    def __post_init__(self):
        v = _symmetrize(np.asarray(self.values, dtype=float))
        np.fill_diagonal(v, 1.0)
        object.__setattr__(self, "values", _readonly(v))

    @property
    def D(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class CommutationMatrix:
    """The permutation ``K`` with ``K @ vec(A) == vec(A.T)`` for ``m x n`` A.

    Stored as an index map: ``(K @ v) == v[perm]``.  Never densified
    unless :meth:`dense` is called explicitly.
    """

    m: int
    n: int
    perm: np.ndarray = field(repr=False)

    def __matmul__(self, other):
        other = np.asarray(other)
        if other.shape[0] != self.m * self.n:
            raise ValueError(
                f"K_({self.m},{self.n}) cannot act on leading dimension {other.shape[0]}"
            )
        return other[self.perm]

    def apply(self, v):
        """Return ``K @ v`` (also works row-wise on a 2-d array)."""
        return self @ v

    def apply_right(self, M):
        """Return ``M @ K``."""
        M = np.asarray(M)
        out = np.empty_like(M)
        out[..., self.perm] = M
        return out

    @property
    def T(self):
        """The transpose, which is ``K_(n,m)``."""
        return commutation_matrix(self.n, self.m)

    def dense(self):
        size = self.m * self.n
        K = np.zeros((size, size))
        K[np.arange(size), self.perm] = 1.0
        return K


def vec(A):
    """Stack the columns of ``A`` into a single vector."""
    return np.asarray(A).reshape(-1, order="F")


def unvec(v, m, n=None):
    """Inverse of :func:`vec` for an ``m x n`` matrix (``n`` defaults to ``m``)."""
    n = m if n is None else n
    return np.asarray(v).reshape((m, n), order="F")


def commutation_matrix(m, n):
    if m < 1 or n < 1:
        raise ValueError("commutation matrix dimensions must be positive")
    # vec(A.T)[j + n*i] = A[i, j] = vec(A)[i + m*j]
    i, j = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    perm = np.empty(m * n, dtype=np.intp)
    perm[(j + n * i).ravel()] = (i + m * j).ravel()
    perm.setflags(write=False)
    return CommutationMatrix(m, n, perm)


def kronecker(A, B):
    """Kronecker product; block ``(i, j)`` of the result is ``A[i, j] * B``."""
    return np.kron(np.asarray(A, dtype=float), np.asarray(B, dtype=float))


def sample_covariance(X):
    """Sample covariance with divisor ``n``.

    Parameters
    ----------
    X : DataMatrix or array_like, shape (n, D)

    Returns
    -------
    CovMatrix
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("sample covariance needs a 2-d array with at least 2 rows")
    Xc = X - X.mean(axis=0)
    return CovMatrix(Xc.T @ Xc / X.shape[0])


def precision(S, min_eig_tol=None):
    """Invert a covariance matrix after checking it is well conditioned.

    Parameters
    ----------
    S : CovMatrix or array_like
    min_eig_tol : float, optional
        Absolute threshold for the smallest eigenvalue.  Defaults to
        ``1e-10 * lambda_max``.

    Raises
    ------
    SingularCovariance
        If ``lambda_min(S) <= min_eig_tol``.  This happens when ``D >= n``
        or the data are degenerate; no pseudo-inverse is attempted.
    """
    S = np.asarray(S, dtype=float)
    S = _symmetrize(S)
    evals, evecs = np.linalg.eigh(S)
    lam_min, lam_max = evals[0], evals[-1]
    tol = 1e-10 * max(lam_max, 0.0) if min_eig_tol is None else min_eig_tol
    if not lam_min > tol:
        raise SingularCovariance(
            f"covariance matrix is singular (lambda_min={lam_min:.3g}, "
            f"tolerance={tol:.3g}); this happens when D >= n or data are degenerate"
        )
    Omega = (evecs / evals) @ evecs.T
    return PrecisionMatrix(Omega, float(lam_min))


def partial_correlations(Omega):
    """``theta_jk = -Omega_jk / sqrt(Omega_jj * Omega_kk)``, unit diagonal."""
    Omega = np.asarray(Omega, dtype=float)
    d = np.diag(Omega)
    if np.any(d <= 0):
        raise NonPositiveDiagonal("precision matrix has a non-positive diagonal entry")
    r = 1.0 / np.sqrt(d)
    Theta = -Omega * r[:, None] * r[None, :]
    np.clip(Theta, -1.0, 1.0, out=Theta)
    return PartialCorrMatrix(Theta)


def sample_correlations(S):
    """Marginal correlations ``S_jk / sqrt(S_jj * S_kk)`` from a covariance."""
    S = np.asarray(S, dtype=float)
    d = np.diag(S)
    if np.any(d <= 0):
        bad = np.flatnonzero(d <= 0).tolist()
        raise ZeroVariance(f"features {bad} have zero variance")
    r = 1.0 / np.sqrt(d)
    R = S * r[:, None] * r[None, :]
    np.clip(R, -1.0, 1.0, out=R)
    return PartialCorrMatrix(R)


@dataclass(frozen=True)
class MatrixNorms:
    frobenius: float
    operator: float
    max: float
    col_sum_l1: float
    entry_sum: float


def norms(A):
    """The matrix norms used in the error analysis.

    ``col_sum_l1`` is the maximum absolute column sum and ``entry_sum``
    the sum of all absolute entries.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    absA = np.abs(A)
    return MatrixNorms(
        frobenius=float(np.sqrt(np.sum(A * A))),
        operator=float(np.linalg.norm(A, 2)),
        max=float(absA.max()),
        col_sum_l1=float(absA.sum(axis=0).max()),
        entry_sum=float(absA.sum()),
    )


def pair_indices(D):
    """Off-diagonal pairs ``(j, k)``, ``j < k``, in row-major order."""
    j, k = np.triu_indices(D, 1)
    return j, k


def offdiag(M):
    """Upper-triangle entries of a square matrix as a vector (row-major)."""
    M = np.asarray(M)
    j, k = np.triu_indices(M.shape[-1], 1)
    return M[..., j, k]
