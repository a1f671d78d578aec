import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from weakgraph.asymptotics import (
    DegenerateVariance,
    delta_diagnostics,
    delta_rectangle,
    gradient_rows,
    hessian_fd,
    normal_quantile,
    simultaneous_z,
    standard_errors,
    t_empirical,
    t_finite_sample_literal,
    t_gaussian_plugin,
    theta_of_sigma,
)
from weakgraph.errors import DataError, NegativeQuadraticForm, NonPositiveDiagonal
from weakgraph.linalg import (
    commutation_matrix,
    offdiag,
    pair_indices,
    partial_correlations,
    precision,
    sample_covariance,
    vec,
)

from conftest import MARKOV3_OMEGA, random_pd


def isserlis_oracle(S):
    """Cov(vec(ee')) entry by entry from Isserlis' theorem."""
    D = S.shape[0]
    T = np.zeros((D * D, D * D))
    for a in range(D):
        for b in range(D):
            for c in range(D):
                for d in range(D):
                    T[a + D * b, c + D * d] = S[a, c] * S[b, d] + S[a, d] * S[b, c]
    return T


def fd_gradient(sigma, p, h=1e-6):
    D = int(round(np.sqrt(sigma.size)))
    g = np.zeros_like(sigma)
    for k in range(sigma.size):
        up, dn = sigma.copy(), sigma.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (theta_of_sigma(up, D)[p] - theta_of_sigma(dn, D)[p]) / (2 * h)
    return g


# --- fourth-moment matrices -------------------------------------------------


def test_plugin_scalar_case():
    assert np.asarray(t_gaussian_plugin(np.array([[2.0]]))).item() == pytest.approx(8.0)


def test_plugin_scalar_monte_carlo():
    eps = np.random.default_rng(1).normal(0, np.sqrt(2), size=10**6)
    assert np.var(eps**2) == pytest.approx(8.0, rel=0.02)


def test_plugin_identity_structure():
    T = np.asarray(t_gaussian_plugin(np.eye(2)))
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[3, 3] = 2
    expected[1:3, 1:3] = 1
    np.testing.assert_array_equal(T, expected)


def test_plugin_matches_isserlis(rng):
    for D in (2, 3, 4):
        S = random_pd(rng, D)
        np.testing.assert_allclose(np.asarray(t_gaussian_plugin(S)), isserlis_oracle(S), rtol=1e-12)


def test_plugin_symmetric_and_antisymmetric_directions(rng):
    S = random_pd(rng, 3)
    T = np.asarray(t_gaussian_plugin(S))
    A = rng.standard_normal((3, 3))
    np.testing.assert_allclose(T @ vec(A - A.T), 0, atol=1e-12)
    K = commutation_matrix(3, 3)
    v = vec(A + A.T)
    np.testing.assert_allclose(v + K @ v, 2 * v)
    assert np.linalg.eigvalsh(T)[0] > -1e-8


def test_empirical_constant_column(rng):
    X = rng.standard_normal((40, 3))
    X[:, 2] = 1.5
    T = np.asarray(t_empirical(X)).reshape(3, 3, 3, 3, order="F")
    assert np.all(T[2, :, :, :] == 0) and np.all(T[:, :, :, 2] == 0)


def test_empirical_brute_force_n3():
    X = np.array([[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]])
    n, D = X.shape
    ybar = X.sum(axis=0) / n
    Vs = [vec(np.outer(y - ybar, y - ybar)) for y in X]
    s = vec(np.asarray(sample_covariance(X)))
    Vhat = [v - s for v in Vs]
    Vbar = sum(Vhat) / n
    ref = np.zeros((D * D, D * D))
    for i in range(n):
        for a in range(D * D):
            for b in range(D * D):
                ref[a, b] += (Vhat[i][a] - Vbar[a]) * (Vhat[i][b] - Vbar[b]) / n
    np.testing.assert_allclose(np.asarray(t_empirical(X)), ref, atol=1e-12)


def test_empirical_converges_to_plugin():
    Sigma = np.array([[1.0, 0.5, 0.2], [0.5, 1.0, 0.3], [0.2, 0.3, 1.0]])
    n = 10**5
    X = np.random.default_rng(7).multivariate_normal(np.zeros(3), Sigma, size=n)
    gap = np.abs(np.asarray(t_empirical(X)) - np.asarray(t_gaussian_plugin(Sigma))).max()
    # entries average products of four unit-variance normals, whose variance
    # is at most E x^8 = 105; the bare sqrt(log D / n) rate omits that constant
    assert gap <= 5 * np.sqrt(105 * np.log(3) / n)


def test_empirical_needs_three_rows():
    with pytest.raises(DataError):
        t_empirical(np.ones((2, 2)))


def test_finite_sample_literal_scalar():
    # c1 = 0.99; (I - K) vanishes for D = 1, leaving c1/(n-1) * 2
    T = np.asarray(t_finite_sample_literal(np.array([[1.0]]), 100)).item()
    assert T == pytest.approx(0.99 / 99 * 2, abs=1e-15)
    assert T == pytest.approx(0.02, abs=1e-15)


def test_finite_sample_literal_symmetric_and_bounded():
    T = np.asarray(t_finite_sample_literal(np.eye(2), 50))
    np.testing.assert_array_equal(T, T.T)
    for n in (10, 100, 10**4, 10**6):
        assert np.all(np.isfinite(np.asarray(t_finite_sample_literal(np.eye(2), n))))
    with pytest.raises(DataError):
        t_finite_sample_literal(np.eye(3), 3)


# --- gradients --------------------------------------------------------------


def test_gradient_at_independence():
    rows = gradient_rows(np.eye(3))
    for p in range(len(rows)):
        f = rows.f(p)
        assert np.count_nonzero(f) == 1
        assert f[rows.f_indices(p)[2]] == -1.0


def test_gradient_factor_count(rng):
    Om = np.asarray(precision(random_pd(rng, 4)))
    rows = gradient_rows(Om)
    assert rows.factors.shape == (6, 3)
    assert all(len(set(rows.f_indices(p))) == 3 for p in range(6))


def test_gradient_two_by_two_fd():
    S = np.array([[1.0, 0.5], [0.5, 1.0]])
    rows = gradient_rows(precision(S))
    g = fd_gradient(vec(S), 0)
    np.testing.assert_allclose(rows.row(0), g, rtol=1e-5, atol=1e-9)


def test_gradient_markov_fd():
    S = np.linalg.inv(MARKOV3_OMEGA)
    rows = gradient_rows(MARKOV3_OMEGA)
    for p in range(3):
        np.testing.assert_allclose(rows.row(p), fd_gradient(vec(S), p), rtol=1e-5, atol=1e-8)


def test_gradient_row_is_factor_times_kron(rng):
    Om = np.asarray(precision(random_pd(rng, 3)))
    rows = gradient_rows(Om)
    for p in range(3):
        np.testing.assert_allclose(rows.row(p), -rows.f(p) @ np.kron(Om, Om), atol=1e-12)
    np.testing.assert_allclose(rows.matrix()[1], rows.row(1))


def test_gradient_needs_positive_diagonal():
    with pytest.raises(NonPositiveDiagonal):
        gradient_rows(np.array([[1.0, 0.0], [0.0, -1.0]]))


# --- Hessians ---------------------------------------------------------------


def test_hessian_quadratic_exact(rng):
    A = rng.standard_normal((4, 4))
    A = A + A.T
    b = rng.standard_normal(4)

    def q(x):
        return 0.5 * x @ A @ x + b @ x

    H = hessian_fd(rng.standard_normal(4), (0, 1), step=1e-2, func=q)
    np.testing.assert_allclose(H, A, atol=1e-8)


def test_hessian_richardson_agreement():
    x = vec(np.eye(2))
    H1 = hessian_fd(x, (0, 1), step=1e-3)
    H2 = hessian_fd(x, (0, 1), step=5e-4)
    assert np.abs(H1 - H2).max() <= 1e-3
    np.testing.assert_allclose(H1, H1.T)


def test_hessian_matches_fd_of_gradient(rng):
    S = random_pd(rng, 3, cond=4)
    x = vec(S)
    H = hessian_fd(x, (0, 2))
    p = 1  # pair (0, 2)
    h = 1e-5
    J = np.zeros((9, 9))
    for k in range(9):
        up, dn = x.copy(), x.copy()
        up[k] += h
        dn[k] -= h
        # the gradient of the unsymmetrized map, evaluated off the symmetric set
        J[k] = (_row_at(up, p) - _row_at(dn, p)) / (2 * h)
    assert np.abs(J - H).max() <= 1e-3 * max(1.0, np.abs(H).max())


def _row_at(sigma, p):
    D = int(round(np.sqrt(sigma.size)))
    Om = np.linalg.inv(sigma.reshape(D, D, order="F"))
    from weakgraph.asymptotics import _grad_matrices

    s, t = pair_indices(D)
    G, _ = _grad_matrices(Om, s, t)
    return vec(G[p])


# --- standard errors --------------------------------------------------------


def test_standard_error_independent_pair_is_one():
    e = standard_errors(gradient_rows(np.eye(2)), t_gaussian_plugin(np.eye(2)))
    assert e[0] == pytest.approx(1.0, abs=1e-12)


def test_standard_error_classical_by_simulation():
    rng = np.random.default_rng(3)
    n, reps = 500, 20000
    X = rng.standard_normal((reps, n, 2))
    Xc = X - X.mean(axis=1, keepdims=True)
    r = (Xc[..., 0] * Xc[..., 1]).sum(1) / np.sqrt((Xc**2).sum(1).prod(-1))
    assert np.std(np.sqrt(n) * r) == pytest.approx(1.0, rel=0.02)


def test_standard_error_monte_carlo_d3():
    rng = np.random.default_rng(11)
    n, reps, D = 10**4, 1500, 3
    thetas = np.empty((reps, 3))
    for i in range(reps):
        X = rng.standard_normal((n, D))
        thetas[i] = offdiag(np.asarray(partial_correlations(precision(sample_covariance(X)))))
    sd = np.sqrt(n) * thetas.std(axis=0)
    e = standard_errors(gradient_rows(np.eye(D)), t_gaussian_plugin(np.eye(D)))
    np.testing.assert_allclose(sd, e, rtol=0.05)


def test_standard_error_homogeneity(rng):
    S = random_pd(rng, 4)
    rows = gradient_rows(precision(S))
    T = np.asarray(t_gaussian_plugin(S))
    np.testing.assert_allclose(standard_errors(rows, 4 * T), 2 * standard_errors(rows, T))
    np.testing.assert_allclose(standard_errors(rows, 9 * T), 3 * standard_errors(rows, T))


def test_standard_error_full_gamma(rng):
    S = random_pd(rng, 3)
    rows = gradient_rows(precision(S))
    T = t_gaussian_plugin(S)
    e, Gamma = standard_errors(rows, T, full=True)
    np.testing.assert_allclose(np.sqrt(np.diag(Gamma)), e)


def test_standard_error_errors():
    rows = gradient_rows(np.eye(2))
    with pytest.raises(DegenerateVariance):
        standard_errors(rows, np.zeros((4, 4)))
    with pytest.raises(NegativeQuadraticForm):
        standard_errors(rows, -np.asarray(t_gaussian_plugin(np.eye(2))))


# --- rectangles -------------------------------------------------------------


def test_z_for_two_features():
    assert simultaneous_z(0.1, 2) == pytest.approx(1.95996, abs=1e-5)


def test_offdiag_pairs_never_wider():
    for D in (2, 5, 30):
        assert simultaneous_z(0.1, D, "offdiag_pairs") <= simultaneous_z(0.1, D)
    # one pair: plain two-sided interval
    assert simultaneous_z(0.1, 2, "offdiag_pairs") == pytest.approx(stats.norm.ppf(0.95))


def test_rectangle_nesting_and_scaling():
    Theta = np.array([[1.0, 0.3, 0.0], [0.3, 1.0, -0.2], [0.0, -0.2, 1.0]])
    e = np.array([1.0, 0.8, 1.2])
    wide = delta_rectangle(Theta, e, 0.05, 100)
    narrow = delta_rectangle(Theta, e, 0.2, 100)
    assert np.all(wide.lower <= narrow.lower) and np.all(wide.upper >= narrow.upper)
    quad = delta_rectangle(Theta, e, 0.05, 400)
    np.testing.assert_allclose(quad.half_width, wide.half_width / 2)
    assert wide.contains(offdiag(Theta))
    assert wide.info["multiplicity"] == "paper_D2"


def test_rectangle_validation():
    with pytest.raises(ValueError):
        delta_rectangle(np.eye(2), np.array([1.0]), 1.5, 10)
    with pytest.raises(DegenerateVariance):
        delta_rectangle(np.eye(2), np.array([0.0]), 0.1, 10)


# --- diagnostics ------------------------------------------------------------


def test_diagnostics_identity():
    d = delta_diagnostics(np.eye(3))
    assert 0 <= d.xi_hat < 10
    assert d.gamma_hat >= 0 and d.rho_hat >= 0
    assert d.min_eig_T == pytest.approx(2.0)


def test_diagnostics_scale_invariant(rng):
    X = rng.standard_normal((200, 4)) @ np.linalg.cholesky(random_pd(rng, 4)).T
    a = delta_diagnostics(sample_covariance(X))
    b = delta_diagnostics(sample_covariance(7.5 * X))
    for k, v in a.as_dict().items():
        assert b.as_dict()[k] == pytest.approx(v, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_diagnostics_two_by_two_finite(seed):
    S = random_pd(np.random.default_rng(seed), 2, cond=10.0)
    d = delta_diagnostics(S)
    vals = np.array(list(d.as_dict().values()))
    assert np.all(np.isfinite(vals)) and np.all(vals >= 0)


# --- normal quantile --------------------------------------------------------


def test_normal_quantile():
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)
    for p in (1e-8, 0.01, 0.3):
        assert normal_quantile(p) == pytest.approx(-normal_quantile(1 - p))
        assert abs(stats.norm.cdf(normal_quantile(p)) - p) <= 1e-10
    for bad in (0.0, 1.0, -0.1, np.nan):
        with pytest.raises(ValueError):
            normal_quantile(bad)
