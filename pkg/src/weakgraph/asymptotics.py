"""Delta-method inference for partial correlations.

The partial correlations are a smooth map of the vectorized covariance,
``theta_j = g_j(sigma)``.  With ``sqrt(n) (s - sigma) -> N(0, T)`` the
first-order expansion gives standard errors
``e_j = sqrt(l_j' T l_j)`` where ``l_j`` is the gradient of ``g_j``.

Gradients are taken with respect to all ``D**2`` entries of ``vec(Sigma)``
treated as free variables, i.e. without imposing symmetry.  Under that
convention ``d omega / d sigma' = -(Omega' kron Omega)`` and ``theta_st``
depends on ``Omega`` only through ``Omega_ss``, ``Omega_tt`` and the
single entry ``Omega_st``.
"""
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import (
    DegenerateVariance,
    NegativeQuadraticForm,
    NonPositiveDiagonal,
    SingularCovariance,
    DataError,
)
from .linalg import (
    commutation_matrix,
    offdiag,
    pair_indices,
    partial_correlations,
    precision,
    sample_correlations,
    vec,
)
from .rectangle import ConfidenceRectangle

__all__ = [
    "FourthMomentMatrix",
    "GradientRows",
    "DeltaDiagnostics",
    "t_gaussian_plugin",
    "t_empirical",
    "t_finite_sample_literal",
    "fourth_moment",
    "theta_of_sigma",
    "gradient_rows",
    "hessian_fd",
    "standard_errors",
    "normal_quantile",
    "simultaneous_z",
    "delta_rectangle",
    "single_pair_interval",
    "appendix_union_rectangle",
    "delta_diagnostics",
]

T_KINDS = ("gaussian_plugin", "empirical", "finite_sample_literal")


# ---------------------------------------------------------------------------
# asymptotic covariance of sqrt(n) (s - sigma)


@dataclass(frozen=True)
class FourthMomentMatrix:
    """``D**2 x D**2`` covariance of ``sqrt(n) vec(S - Sigma)``."""

    values: np.ndarray
    estimator_kind: str

    def __post_init__(self):
        if self.estimator_kind not in T_KINDS:
            raise ValueError(f"unknown estimator kind {self.estimator_kind!r}")
        v = np.asarray(self.values, dtype=float)
        v = 0.5 * (v + v.T)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def D(self):
        return int(round(np.sqrt(self.values.shape[0])))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.values)[0])

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _isserlis(S):
    # E(ee' kron ee') - sigma sigma' = (I + K)(S kron S) for Gaussian e
    S = np.asarray(S, dtype=float)
    SS = np.kron(S, S)
    K = commutation_matrix(S.shape[0], S.shape[0])
    return SS, K @ SS


def t_gaussian_plugin(S):
    """Gaussian plug-in ``T = (I + K_(D,D)) (S kron S)``."""
    SS, KSS = _isserlis(S)
    return FourthMomentMatrix(SS + KSS, "gaussian_plugin")


def t_empirical(X):
    """Empirical covariance of ``vec((Y_i - Ybar)(Y_i - Ybar)')``.

    Needs no distributional assumption; use it for heavy-tailed data.
    """
    X = np.asarray(X, dtype=float)
    n, D = X.shape
    if n < 3:
        raise DataError("t_empirical needs at least 3 observations")
    Xc = X - X.mean(axis=0)
    # row i is vec(Yc_i Yc_i'); the outer product is symmetric so order is moot
    V = (Xc[:, :, None] * Xc[:, None, :]).reshape(n, D * D)
    V = V - V.mean(axis=0)
    return FourthMomentMatrix(V.T @ V / n, "empirical")


def t_finite_sample_literal(S, n):
    """The finite-sample variance of ``sqrt(n)(s - sigma)`` exactly as printed.

    Evaluates::

        c1/(n-1) * (E(ee' kron ee') - sigma sigma')
            + (1 - c1/(n-1)) * (I - K)(S kron S),   c1 = D (1 - 1/n)

    with the Gaussian plug-in for the fourth moment.  The printed
    constants do not reduce to the asymptotic ``T`` as ``n`` grows, so this
    is offered for reference only and is never the default.
    """
    S = np.asarray(S, dtype=float)
    D = S.shape[0]
    if n <= D:
        raise DataError(f"t_finite_sample_literal needs n > D (n={n}, D={D})")
    c1 = D * (1.0 - 1.0 / n)
    SS, KSS = _isserlis(S)
    T = c1 / (n - 1) * (SS + KSS) + (1.0 - c1 / (n - 1)) * (SS - KSS)
    return FourthMomentMatrix(T, "finite_sample_literal")


def fourth_moment(kind, X=None, S=None, n=None):
    """Dispatch on the estimator kind used by the CLI and the estimators."""
    if kind == "gaussian_plugin":
        return t_gaussian_plugin(S)
    if kind == "empirical":
        return t_empirical(X)
    if kind == "finite_sample_literal":
        return t_finite_sample_literal(S, n)
    raise ValueError(f"unknown T estimator {kind!r}")


# ---------------------------------------------------------------------------
# gradients of theta = G(sigma)


def theta_of_sigma(sigma, D=None):
    """Partial correlations ``theta_st`` (``s < t``) as a function of vec(Sigma).

    ``sigma`` may be a batch of shape ``(..., D**2)``.  No symmetrization
    is applied, so the map is differentiable in every coordinate.
    """
    sigma = np.asarray(sigma, dtype=float)
    if D is None:
        D = int(round(np.sqrt(sigma.shape[-1])))
    Sig = sigma.reshape(sigma.shape[:-1] + (D, D))
    Sig = np.swapaxes(Sig, -1, -2)  # Fortran-order unvec
    Om = np.linalg.inv(Sig)
    d = np.diagonal(Om, axis1=-2, axis2=-1)
    s, t = pair_indices(D)
    return -Om[..., s, t] / np.sqrt(d[..., s] * d[..., t])


def _grad_matrices(Om, s, t):
    """Gradient of each ``theta_st`` w.r.t. Sigma, as ``(m, D, D)`` matrices.

    Entry ``[p, a, b]`` is ``d theta_p / d Sigma_ab``; ``vec`` of slice ``p``
    is the row ``l_p``.  ``Om`` is the (possibly non-symmetric) inverse.
    """
    d = np.diag(Om)
    if np.any(d <= 0):
        raise NonPositiveDiagonal("precision matrix has a non-positive diagonal entry")
    root = np.sqrt(d[s] * d[t])
    theta = -Om[s, t] / root
    f_ss = -theta / (2.0 * d[s])
    f_tt = -theta / (2.0 * d[t])
    f_st = -1.0 / root
    # -(Om' F Om') with F holding the three sparse entries
    OmT = Om.T
    G = (
        f_ss[:, None, None] * OmT[:, s].T[:, :, None] * OmT[s, :][:, None, :]
        + f_tt[:, None, None] * OmT[:, t].T[:, :, None] * OmT[t, :][:, None, :]
        + f_st[:, None, None] * OmT[:, s].T[:, :, None] * OmT[t, :][:, None, :]
    )
    return -G, np.stack([f_ss, f_tt, f_st], axis=1)


@dataclass(frozen=True)
class GradientRows:
    """Gradients ``l_j`` of the off-diagonal partial correlations.

    Each ``l_j = f_j (-(Omega kron Omega))`` where ``f_j`` has three
    structural nonzeros at the vec positions of ``(s,s)``, ``(t,t)`` and
    ``(s,t)``.  Dense rows are built on demand.
    """

    omega: np.ndarray
    theta: np.ndarray
    factors: np.ndarray  # (m, 3): d theta / d Omega_ss, _tt, _st

    @property
    def D(self):
        return self.omega.shape[0]

    @property
    def pairs(self):
        return pair_indices(self.D)

    def __len__(self):
        return self.factors.shape[0]

    def f_indices(self, p):
        s, t = self.pairs
        D = self.D
        a, b = int(s[p]), int(t[p])
        return np.array([a + D * a, b + D * b, a + D * b])

    def f(self, p):
        out = np.zeros(self.D**2)
        out[self.f_indices(p)] = self.factors[p]
        return out

    def matrices(self):
        s, t = self.pairs
        G, _ = _grad_matrices(self.omega, s, t)
        return G

    def row(self, p):
        s, t = self.pairs
        G, _ = _grad_matrices(self.omega, s[p : p + 1], t[p : p + 1])
        return vec(G[0])

    def matrix(self):
        """All rows stacked, shape ``(m, D**2)``."""
        G = self.matrices()
        return np.swapaxes(G, 1, 2).reshape(len(self), self.D**2)


def gradient_rows(Omega, Theta=None):
    """Build the gradient rows from a precision matrix.

    ``Theta`` is accepted for interface symmetry; it is recomputed from
    ``Omega`` when omitted and must agree with it otherwise.
    """
    Om = np.asarray(Omega, dtype=float)
    if np.any(np.diag(Om) <= 0):
        raise NonPositiveDiagonal("precision matrix has a non-positive diagonal entry")
    if Theta is None:
        Theta = partial_correlations(Om)
    s, t = pair_indices(Om.shape[0])
    _, factors = _grad_matrices(Om, s, t)
    factors.setflags(write=False)
    return GradientRows(omega=Om, theta=offdiag(np.asarray(Theta)), factors=factors)


def _symmetric_part_pd(sigma_batch, D):
    Sig = np.swapaxes(sigma_batch.reshape(-1, D, D), -1, -2)
    sym = 0.5 * (Sig + np.swapaxes(Sig, -1, -2))
    return np.all(np.linalg.eigvalsh(sym)[:, 0] > 0)


def hessian_fd(sigma_vec, pair, step=None, func=None):
    """Central second-difference Hessian of ``g_pair`` at ``sigma_vec``.

    Parameters
    ----------
    sigma_vec : array_like, length D**2
        Vectorized covariance at which to differentiate.
    pair : (int, int)
        The partial correlation ``theta_jk`` to differentiate.
    step : float, optional
        Finite-difference step; defaults to ``1e-4 * max|sigma|``.
    func : callable, optional
        Replaces ``g_pair``; maps a length-``D**2`` vector to a scalar.

    Raises
    ------
    SingularCovariance
        If a perturbed matrix is not positive definite even after the
        step is reduced once by a factor of ten.
    """
    x = np.asarray(sigma_vec, dtype=float).reshape(-1)
    N = x.shape[0]
    D = int(round(np.sqrt(N)))
    if step is None:
        step = 1e-4 * max(np.abs(x).max(), 1e-300)
    if step <= 0:
        raise ValueError("step must be positive")

    if func is None:
        j, k = sorted(pair)
        s, t = pair_indices(D)
        p = int(np.flatnonzero((s == j) & (t == k))[0])

        def evaluate(pts):
            return theta_of_sigma(pts, D)[..., p]
    else:

        def evaluate(pts):
            return np.array([func(row) for row in pts])

    iu, ku = np.triu_indices(N)
    signs = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)

    for attempt in range(2):
        h = step / (10.0**attempt)
        pts = np.repeat(x[None, :], 4 * iu.size, axis=0).reshape(iu.size, 4, N)
        rows = np.arange(iu.size)
        for q, (a, b) in enumerate(signs):
            pts[rows, q, iu] += a * h
            pts[rows, q, ku] += b * h
        pts = pts.reshape(-1, N)
        if func is None and not _symmetric_part_pd(pts, D):
            continue
        vals = evaluate(pts).reshape(iu.size, 4)
        off = (vals[:, 0] - vals[:, 1] - vals[:, 2] + vals[:, 3]) / (4 * h * h)
        H = np.zeros((N, N))
        H[iu, ku] = off
        H[ku, iu] = off
        # on the diagonal the stencil above is (f(x+2h) - 2f(x) + f(x-2h)) / 4h^2
        return H
    raise SingularCovariance(
        "perturbed covariance is not positive definite; reduce the step"
    )


# ---------------------------------------------------------------------------
# standard errors and rectangles


def standard_errors(rows, T, full=False):
    """Asymptotic standard errors ``e_j = sqrt(l_j' T l_j)``.

    Parameters
    ----------
    rows : GradientRows
    T : FourthMomentMatrix or array_like
    full : bool
        Also return ``Gamma = L T L'``.

    Returns
    -------
    e : ndarray, shape (m,)
    Gamma : ndarray, shape (m, m)
        Only when ``full`` is true.
    """
    L = rows.matrix()
    Tv = np.asarray(T, dtype=float)
    LT = L @ Tv
    q = np.einsum("ij,ij->i", LT, L)
    scale = np.einsum("ij,ij->i", L, L) * np.abs(Tv).max()
    tol = 1e-10 * np.maximum(scale, 1.0)
    if np.any(q < -tol):
        raise NegativeQuadraticForm(
            f"l' T l = {q.min():.3g} < 0; the fourth-moment matrix is not PSD"
        )
    q = np.where(q < 0, 0.0, q)
    e = np.sqrt(q)
    if np.any(e < 1e-12):
        bad = int(np.argmin(e))
        s, t = rows.pairs
        raise DegenerateVariance(
            f"standard error of theta{(int(s[bad]), int(t[bad]))} is {e[bad]:.3g}; "
            "the asymptotic variance is degenerate"
        )
    if full:
        return e, LT @ L.T
    return e


def normal_quantile(p):
    """Standard normal quantile ``Phi^{-1}(p)`` for ``0 < p < 1``."""
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0) | (p_arr >= 1)) or np.any(np.isnan(p_arr)):
        raise ValueError(f"normal_quantile needs 0 < p < 1, got {p}")
    q = special.ndtri(p_arr)
    return float(q) if q.ndim == 0 else q


def simultaneous_z(alpha, D, multiplicity="paper_D2"):
    """Normal critical value for a simultaneous rectangle.

    ``"paper_D2"`` gives ``-Phi^{-1}(alpha / D**2)``.  ``"offdiag_pairs"``
    is the two-sided Bonferroni value ``-Phi^{-1}(alpha / (2 m))`` over the
    ``m = D(D-1)/2`` distinct pairs, which is never larger.
    """
    if multiplicity == "paper_D2":
        m = D * D
    elif multiplicity == "offdiag_pairs":
        m = D * (D - 1)
    else:
        raise ValueError(f"unknown multiplicity {multiplicity!r}")
    return -normal_quantile(alpha / m)


def _pair_vector(Theta_hat):
    a = np.asarray(Theta_hat, dtype=float)
    if a.ndim == 2:
        return offdiag(a), a.shape[0]
    m = a.shape[0]
    D = int(round((1 + np.sqrt(1 + 8 * m)) / 2))
    return a, D


def delta_rectangle(Theta_hat, e, alpha, n, multiplicity="paper_D2"):
    """Studentized simultaneous rectangle ``theta_hat +- z e / sqrt(n)``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    center, D = _pair_vector(Theta_hat)
    e = np.asarray(e, dtype=float)
    if e.shape != center.shape:
        raise ValueError("one standard error per pair is required")
    if np.any(e <= 0):
        raise DegenerateVariance("standard errors must be positive")
    z = simultaneous_z(alpha, D, multiplicity)
    return ConfidenceRectangle.from_half_width(
        center, z * e / np.sqrt(n), alpha, "delta", n,
        info={"z": z, "multiplicity": multiplicity},
    )


def single_pair_interval(theta_hat, e, alpha, n):
    """Two-sided ``1 - alpha`` interval for one partial correlation."""
    z = -normal_quantile(alpha / 2)
    half = z * e / np.sqrt(n)
    return theta_hat - half, theta_hat + half


def appendix_union_rectangle(Theta_hat, e, alpha, n):
    """Per-entry intervals joined by the union bound over all ``D**2`` entries.

    Numerically the same intervals as :func:`delta_rectangle` with the
    default multiplicity; it differs in the guarantee it carries (the
    error term grows with ``D**2``).
    """
    rect = delta_rectangle(Theta_hat, e, alpha, n, "paper_D2")
    return ConfidenceRectangle.from_half_width(
        rect.center, rect.half_width, alpha, "appendix_union", n, info=rect.info
    )


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class DeltaDiagnostics:
    """Plug-in readouts of the delta-method error terms at ``a = s``.

    Computed on the correlation scale; see :func:`delta_diagnostics`.
    """

    gamma_hat: float
    xi_hat: float
    rho_hat: float
    min_eig_T: float

    def as_dict(self):
        return {
            "gamma_hat": self.gamma_hat,
            "xi_hat": self.xi_hat,
            "rho_hat": self.rho_hat,
            "min_eig_T": self.min_eig_T,
        }


def _gaussian_se(G, A):
    # l' (I + K)(A kron A) l with l = vec(G), for possibly non-symmetric A
    AGA = A[None] @ G @ A.T[None]
    q = np.einsum("pab,pab->p", G + np.swapaxes(G, 1, 2), AGA)
    return np.sqrt(np.maximum(q, 0.0))


def delta_diagnostics(S, n=None, step=1e-4):
    """Plug-in versions of ``gamma_n``, ``xi_n`` and ``rho_n``.

    The sup over a shrinking ball is replaced by evaluation at the sample
    covariance, and ``T`` is the Gaussian plug-in.  Gradients, Hessians
    and the standard-error gradient ``U'_j`` all scale with powers of the
    data units, so everything is evaluated at the sample *correlation*
    matrix; the readouts are then invariant to rescaling any feature.

    Parameters
    ----------
    S : CovMatrix or array_like
    n : int, optional
        Sample size; recorded only, the plug-in values do not depend on it.
    step : float
        Central-difference step for the Hessians and ``U'_j``.

    Returns
    -------
    DeltaDiagnostics
    """
    R = np.asarray(sample_correlations(S), dtype=float)
    Omega = np.asarray(precision(R), dtype=float)
    D = R.shape[0]
    s, t = pair_indices(D)
    G0, _ = _grad_matrices(Omega, s, t)
    e = _gaussian_se(G0, R)
    if np.any(e < 1e-12):
        raise DegenerateVariance("a plug-in standard error is zero")
    xi = np.abs(G0).sum(axis=(1, 2)) / e

    sigma = vec(R)
    N = D * D
    hess_abs = np.zeros(len(s))
    u_grad_abs = np.zeros(len(s))
    for k in range(N):
        plus = sigma.copy()
        minus = sigma.copy()
        plus[k] += step
        minus[k] -= step
        A_p = plus.reshape(D, D, order="F")
        A_m = minus.reshape(D, D, order="F")
        G_p, _ = _grad_matrices(np.linalg.inv(A_p), s, t)
        G_m, _ = _grad_matrices(np.linalg.inv(A_m), s, t)
        # column k of every Hessian
        hess_abs += np.abs(G_p - G_m).sum(axis=(1, 2)) / (2 * step)
        u_grad_abs += np.abs(_gaussian_se(G_p, A_p) - _gaussian_se(G_m, A_m)) / (2 * step)

    evals = np.linalg.eigvalsh(R)
    return DeltaDiagnostics(
        gamma_hat=float(np.max(hess_abs / e)),
        xi_hat=float(np.max(xi)),
        rho_hat=float(np.max(u_grad_abs / e)),
        # T = (I + K)(R kron R) vanishes on antisymmetric directions; on the
        # symmetric subspace its smallest eigenvalue is 2 lambda_min(R)^2
        min_eig_T=float(2.0 * evals[0] ** 2),
    )
