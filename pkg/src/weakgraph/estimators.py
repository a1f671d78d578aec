"""Graph estimators with a no-false-edge guarantee.

Each estimator builds a simultaneous confidence set for a vector of
dependence measures and keeps an edge only when the interval for that
pair excludes the null value (or null band).  With probability at least
``1 - alpha`` (asymptotically) the estimated edge set is then a subset of
the true one.
"""
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .asymptotics import fourth_moment, gradient_rows, standard_errors, delta_rectangle
from .bootstrap import (
    DEFAULT_B,
    StatisticSpec,
    batch_covariance,
    bootstrap_rectangle,
    correlation_statistic,
    partial_correlation_statistic,
    super_accurate_intervals,
)
from .errors import (
    BandUndefined,
    BudgetExceeded,
    ClusterTooLarge,
    NodeMismatch,
    SingularSubmatrix,
)
from .linalg import (
    DataMatrix,
    PartialCorrMatrix,
    offdiag,
    pair_indices,
    partial_correlations,
    precision,
    sample_correlations,
    sample_covariance,
)
from .rectangle import ConfidenceRectangle

__all__ = [
    "PairInterval",
    "GraphEstimate",
    "ClusterAssignment",
    "FiniteSampleBand",
    "GuaranteeCheck",
    "graph_from_rectangle",
    "partial_corr_graph",
    "correlation_graph",
    "l_centers",
    "farthest_point_order",
    "feature_distances",
    "cluster_graph",
    "restricted_partial_corr",
    "restricted_partial_corr_matrix",
    "restricted_statistic",
    "restricted_graph",
    "finite_sample_width",
    "finite_sample_graph",
    "graph_guarantee_check",
]

PC_METHODS = ("delta", "bootstrap", "super_accurate")
DISTANCE_KINDS = ("one_minus_abs_corr", "euclidean_on_standardized")
DEFAULT_BUDGET = 10**7


@dataclass(frozen=True)
class PairInterval:
    estimate: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True)
class GraphEstimate:
    """An estimated undirected graph.

    Nodes are referred to by position in ``node_labels``.  ``edges`` holds
    sorted pairs ``(i, j)`` with ``i < j``; ``per_pair`` has an interval for
    every pair that was tested, edge or not.
    """

    node_labels: tuple
    edges: tuple
    per_pair: dict
    alpha: float
    method: str
    n: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        D = len(self.node_labels)
        edges = tuple(sorted((min(i, j), max(i, j)) for i, j in self.edges))
        for i, j in edges:
            if i == j:
                raise ValueError("self-loops are not allowed")
            if not (0 <= i < D and 0 <= j < D):
                raise ValueError(f"edge {(i, j)} refers to a missing node")
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "node_labels", tuple(str(x) for x in self.node_labels))
        object.__setattr__(self, "edges", edges)

    @property
    def num_nodes(self):
        return len(self.node_labels)

    def edge_set(self):
        return set(self.edges)

    def adjacency(self):
        A = np.zeros((self.num_nodes, self.num_nodes), dtype=bool)
        for i, j in self.edges:
            A[i, j] = A[j, i] = True
        return A


def graph_from_rectangle(rect, labels, null_band=0.0, meta=None):
    """Keep pair ``(j, k)`` iff its interval is disjoint from ``[-band, band]``."""
    D = len(labels)
    j, k = pair_indices(D)
    keep = rect.excludes(-null_band, null_band)
    per_pair = {
        (int(a), int(b)): PairInterval(float(c), float(lo), float(hi))
        for a, b, c, lo, hi in zip(j, k, rect.center, rect.lower, rect.upper)
    }
    edges = [(int(a), int(b)) for a, b in zip(j[keep], k[keep])]
    return GraphEstimate(
        node_labels=tuple(labels),
        edges=tuple(edges),
        per_pair=per_pair,
        alpha=rect.alpha,
        method=rect.method,
        n=rect.n,
        meta=dict(meta or {}),
    )


def _as_data(X):
    return X if isinstance(X, DataMatrix) else DataMatrix(np.asarray(X, dtype=float))


# ---------------------------------------------------------------------------
# partial correlation graphs


def partial_corr_rectangle(
    X,
    alpha,
    method="bootstrap",
    B=DEFAULT_B,
    seed=0,
    multiplicity="paper_D2",
    t_estimator="gaussian_plugin",
    super_variant="reuse_reps",
    N=2000,
    workers=1,
):
    """Simultaneous rectangle for all off-diagonal partial correlations."""
    data = np.asarray(X, dtype=float)
    n = data.shape[0]
    if method == "delta":
        S = sample_covariance(data)
        Omega = precision(S)
        Theta = partial_correlations(Omega)
        T = fourth_moment(t_estimator, X=data, S=S, n=n)
        e = standard_errors(gradient_rows(Omega, Theta), T)
        rect = delta_rectangle(Theta, e, alpha, n, multiplicity)
        rect.info["t_estimator"] = t_estimator
        return rect
    if method == "bootstrap":
        # fail fast with SingularCovariance on the original sample
        precision(sample_covariance(data))
        return bootstrap_rectangle(
            data, partial_correlation_statistic(), alpha, B, seed, workers
        )
    if method == "super_accurate":
        precision(sample_covariance(data))
        return super_accurate_intervals(
            data, alpha, B=B, N=N, variant=super_variant, seed=seed, workers=workers
        ).rectangle
    raise ValueError(f"unknown partial-correlation method {method!r}; choose from {PC_METHODS}")


def partial_corr_graph(X, alpha, method="bootstrap", **opts):
    """Partial-correlation graph: edge iff the interval for ``theta_jk`` excludes 0.

    Parameters
    ----------
    X : DataMatrix or array_like, shape (n, D)
        Needs ``D < n``; otherwise :class:`~weakgraph.errors.SingularCovariance`.
    alpha : float
    method : {"delta", "bootstrap", "super_accurate"}
    **opts
        ``B``, ``seed``, ``multiplicity``, ``t_estimator``,
        ``super_variant``, ``N``, ``workers``; see
        :func:`partial_corr_rectangle`.
    """
    data = _as_data(X)
    rect = partial_corr_rectangle(data.values, alpha, method, **opts)
    meta = {k: v for k, v in rect.info.items() if np.isscalar(v)}
    return graph_from_rectangle(rect, data.labels, 0.0, meta)


# ---------------------------------------------------------------------------
# correlation graphs


def correlation_graph(X, alpha, epsilon=0.0, B=DEFAULT_B, seed=0, workers=1):
    """Correlation graph: edge iff the bootstrap interval misses ``[-eps, eps]``.

    Works for ``D > n``.
    """
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    data = _as_data(X)
    rect = bootstrap_rectangle(data.values, correlation_statistic(), alpha, B, seed, workers)
    meta = {k: v for k, v in rect.info.items() if np.isscalar(v)}
    meta["epsilon"] = epsilon
    return graph_from_rectangle(rect, data.labels, epsilon, meta)


# ---------------------------------------------------------------------------
# cluster graphs


@dataclass(frozen=True)
class ClusterAssignment:
    """Prototype features (in selection order) and each feature's cluster.

    ``cluster_of[f]`` is a position in ``prototypes``.
    """

    prototypes: tuple
    cluster_of: tuple
    distance_kind: str

    @property
    def L(self):
        return len(self.prototypes)

    def members(self, c):
        return [f for f, g in enumerate(self.cluster_of) if g == c]

    def averaging_matrix(self):
        """``(D, L)`` matrix whose columns average the features of a cluster."""
        W = np.zeros((len(self.cluster_of), self.L))
        for c in range(self.L):
            idx = self.members(c)
            W[idx, c] = 1.0 / len(idx)
        return W


def feature_distances(X, distance_kind="one_minus_abs_corr"):
    """Pairwise distances between the columns of ``X``."""
    R = np.asarray(sample_correlations(sample_covariance(X)))
    if distance_kind == "one_minus_abs_corr":
        dist = 1.0 - np.abs(R)
    elif distance_kind == "euclidean_on_standardized":
        # ||z_i - z_j||^2 = 2 n (1 - r_ij) for columns standardized with divisor n
        n = np.asarray(X).shape[0]
        dist = np.sqrt(np.clip(2.0 * n * (1.0 - R), 0.0, None))
    else:
        raise ValueError(f"unknown distance {distance_kind!r}; choose from {DISTANCE_KINDS}")
    np.fill_diagonal(dist, 0.0)
    return dist


def farthest_point_order(dist, L, first):
    """Greedy farthest-point traversal from ``first``.

    Each step adds the unchosen feature maximizing the minimum distance
    to those already chosen; ties go to the smallest feature index.
    """
    dist = np.asarray(dist, dtype=float)
    D = dist.shape[0]
    chosen = [int(first)]
    mind = dist[first].copy()
    available = np.ones(D, dtype=bool)
    available[first] = False
    while len(chosen) < L:
        cand = np.where(available, mind, -np.inf)
        j = int(np.argmax(cand))
        chosen.append(j)
        available[j] = False
        mind = np.minimum(mind, dist[j])
    return chosen


def _assign(dist, prototypes):
    proto = np.asarray(prototypes)
    # argmin returns the first minimum, i.e. the earliest prototype on ties
    cluster_of = np.argmin(dist[:, proto], axis=1)
    cluster_of[proto] = np.arange(len(proto))
    return tuple(int(c) for c in cluster_of)


def l_centers(X, L, distance_kind="one_minus_abs_corr", seed=0, dist=None):
    """Choose ``L`` prototype features and assign every feature to one.

    The first prototype is drawn uniformly from the seed; the rest follow
    :func:`farthest_point_order`.  A precomputed ``dist`` overrides the
    distance computed from ``X``.
    """
    if dist is None:
        dist = feature_distances(X, distance_kind)
    dist = np.asarray(dist, dtype=float)
    D = dist.shape[0]
    if not 1 <= L <= D:
        raise ValueError(f"L must lie in [1, D={D}], got {L}")
    first = int(_rng.substream(seed, _rng.CENTERS).integers(D))
    prototypes = farthest_point_order(dist, L, first)
    return ClusterAssignment(tuple(prototypes), _assign(dist, prototypes), distance_kind)


def cluster_graph(
    X,
    L,
    alpha,
    method="bootstrap",
    seed=0,
    distance_kind="one_minus_abs_corr",
    B=DEFAULT_B,
    within_clusters=False,
    epsilon=0.0,
    workers=1,
    **opts,
):
    """Graph over ``L`` cluster-averaged features with data splitting.

    Rows are split at random into two halves.  Prototypes and cluster
    membership come from the first half only; the cluster averages of the
    second half feed :func:`partial_corr_graph`.

    With ``within_clusters`` each cluster with at least two features also
    gets a correlation graph on the second half, stored in
    ``meta["within_cluster_graphs"]``.  Each of those uses its own
    ``alpha``; there is no joint guarantee across them.
    """
    data = _as_data(X)
    n, D = data.values.shape
    half = n // 2
    if L >= half:
        raise ClusterTooLarge(f"need L < floor(n/2) = {half}, got L = {L}")
    perm = _rng.substream(seed, _rng.SPLIT).permutation(n)
    first, second = data.values[perm[:half]], data.values[perm[half:]]
    assignment = l_centers(first, L, distance_kind, seed)
    W = assignment.averaging_matrix()
    derived = second @ W
    labels = [data.labels[p] for p in assignment.prototypes]
    graph = partial_corr_graph(
        DataMatrix(derived, labels), alpha, method, B=B, seed=seed, workers=workers, **opts
    )
    meta = dict(graph.meta)
    meta.update(
        {
            "L": L,
            "prototypes": list(assignment.prototypes),
            "cluster_of": list(assignment.cluster_of),
            "distance_kind": distance_kind,
            "split": [half, n - half],
        }
    )
    if within_clusters:
        sub = {}
        for c in range(L):
            idx = assignment.members(c)
            if len(idx) < 2:
                continue
            g = correlation_graph(
                DataMatrix(second[:, idx], [data.labels[i] for i in idx]),
                alpha, epsilon, B, seed, workers,
            )
            sub[labels[c]] = [[g.node_labels[i], g.node_labels[j]] for i, j in g.edges]
        meta["within_cluster_graphs"] = sub
    return GraphEstimate(
        node_labels=graph.node_labels,
        edges=graph.edges,
        per_pair=graph.per_pair,
        alpha=alpha,
        method=f"cluster_{graph.method}",
        n=graph.n,
        meta=meta,
    )


def cluster_true_theta(sigma, assignment):
    """Partial correlations of the cluster averages under covariance ``sigma``."""
    W = assignment.averaging_matrix()
    Sig = W.T @ np.asarray(sigma) @ W
    return partial_correlations(precision(Sig))


# ---------------------------------------------------------------------------
# restricted partial correlations


def _subset_count(D, L):
    return sum(math.comb(D - 2, size) for size in range(min(L, D - 2) + 1))


def _restricted_batch(Rb, L, early_exit=True):
    """``sup_{|S| <= L} |theta(j, k | S)|`` for every pair, for a stack of
    correlation matrices ``Rb`` of shape ``(B, D, D)``.

    Returns ``(values, ok, bad)`` where ``bad`` is ``(batch row, pair, subset)``
    for the first singular submatrix met, or None.
    """
    Bn, D, _ = Rb.shape
    j, k = pair_indices(D)
    m = j.size
    best = np.abs(Rb[:, j, k])
    ok = np.ones(Bn, dtype=bool)
    bad = None
    others = [
        np.array([f for f in range(D) if f != a and f != b]) for a, b in zip(j, k)
    ]
    for size in range(1, min(L, D - 2) + 1):
        active = np.ones(m, dtype=bool)
        if early_exit:
            active = np.any(best < 1 - 1e-12, axis=0)
        for p in np.flatnonzero(active):
            subsets = np.array(list(itertools.combinations(others[p], size)))
            idx = np.concatenate(
                [np.full((len(subsets), 1), j[p]), np.full((len(subsets), 1), k[p]), subsets],
                axis=1,
            )  # (nsub, size + 2)
            sub = Rb[:, idx[:, :, None], idx[:, None, :]]  # (B, nsub, s, s)
            flat = sub.reshape(-1, size + 2, size + 2)
            evals = np.linalg.eigvalsh(flat)
            good = evals[:, 0] > 1e-10 * np.maximum(evals[:, -1], 0.0)
            good = good.reshape(Bn, len(subsets))
            if not np.all(good):
                rows, cols = np.nonzero(~good)
                ok[rows] = False
                if bad is None:
                    bad = (int(rows[0]), (int(j[p]), int(k[p])), tuple(int(x) for x in subsets[cols[0]]))
                flat = np.where(good.reshape(-1)[:, None, None], flat, np.eye(size + 2))
            P = np.linalg.inv(flat)
            val = np.abs(P[:, 0, 1] / np.sqrt(P[:, 0, 0] * P[:, 1, 1])).reshape(Bn, len(subsets))
            val = np.where(good, val, 0.0)
            best[:, p] = np.maximum(best[:, p], np.minimum(val.max(axis=1), 1.0))
    best[~ok] = np.nan
    return best, ok, bad


def restricted_partial_corr(S, j, k, L):
    """``max over |S'| <= L`` of ``|partial correlation of (j, k) given S'|``.

    All conditioning sets drawn from the remaining features are searched,
    in lexicographic order, including the empty set.  At ``L = 0`` the
    value is exactly ``|r_jk|``.
    """
    S = np.asarray(S, dtype=float)
    D = S.shape[0]
    if j == k:
        raise ValueError("need two distinct features")
    R = np.asarray(sample_correlations(S))
    value = abs(R[j, k])
    others = [f for f in range(D) if f not in (j, k)]
    for size in range(1, min(L, D - 2) + 1):
        for subset in itertools.combinations(others, size):
            if value >= 1 - 1e-12:
                return value
            idx = [j, k, *subset]
            sub = R[np.ix_(idx, idx)]
            evals = np.linalg.eigvalsh(sub)
            if not evals[0] > 1e-10 * max(evals[-1], 0.0):
                raise SingularSubmatrix((j, k), subset)
            P = np.linalg.inv(sub)
            value = max(value, min(abs(P[0, 1]) / math.sqrt(P[0, 0] * P[1, 1]), 1.0))
    return value


def restricted_partial_corr_matrix(S, L):
    """All restricted partial correlations, as a symmetric matrix (diagonal 1)."""
    R = np.asarray(sample_correlations(S))
    vals, ok, bad = _restricted_batch(R[None], L)
    if not ok[0]:
        raise SingularSubmatrix(bad[1], bad[2])
    D = R.shape[0]
    out = np.eye(D)
    j, k = pair_indices(D)
    out[j, k] = out[k, j] = vals[0]
    return out


def _check_budget(D, L, budget):
    cost = D * D * _subset_count(D, L)
    if cost > budget:
        raise BudgetExceeded(
            f"restricted statistic needs D^2 * #subsets = {cost} evaluations per "
            f"replicate, above the cap of {budget}"
        )


def restricted_statistic(L, budget=DEFAULT_BUDGET):
    """Bootstrap statistic: restricted partial correlations of all pairs."""

    def extract(X):
        return offdiag(restricted_partial_corr_matrix(sample_covariance(X), L))

    def batch(Xb):
        Sb = batch_covariance(Xb)
        d = np.diagonal(Sb, axis1=1, axis2=2)
        ok = np.all(d > 0, axis=1)
        r = 1.0 / np.sqrt(np.where(d > 0, d, 1.0))
        Rb = Sb * r[:, :, None] * r[:, None, :]
        idx = np.arange(Rb.shape[1])
        Rb[:, idx, idx] = 1.0
        vals, ok2, _ = _restricted_batch(Rb, L)
        ok &= ok2
        vals[~ok] = np.nan
        return vals, ok

    return StatisticSpec("restricted_partial", extract, batch, {"L": L, "budget": budget})


def restricted_graph(X, L, alpha, B=DEFAULT_B, seed=0, budget=DEFAULT_BUDGET, workers=1):
    """Graph of restricted partial correlations; edge iff ``ci_lo > 0``.

    ``L`` must be fixed before looking at the data.
    """
    data = _as_data(X)
    _check_budget(data.D, L, budget)
    rect = bootstrap_rectangle(data.values, restricted_statistic(L, budget), alpha, B, seed, workers)
    meta = {k: v for k, v in rect.info.items() if np.isscalar(v)}
    meta["L"] = L
    graph = graph_from_rectangle(rect, data.labels, 0.0, meta)
    return GraphEstimate(
        node_labels=graph.node_labels,
        edges=graph.edges,
        per_pair=graph.per_pair,
        alpha=alpha,
        method="restricted",
        n=graph.n,
        meta=graph.meta,
    )


# ---------------------------------------------------------------------------
# finite-sample band


@dataclass(frozen=True)
class FiniteSampleBand:
    theta_hat: PartialCorrMatrix
    delta_n: float
    epsilon_n: float
    c_alpha: float
    lambda_hat: float


def finite_sample_width(lambda_hat, c_alpha, D, n):
    """``(epsilon_n, Delta_n)`` for the finite-sample band.

    ``epsilon_n = (c/lam^2) sqrt(D/n) / (1 - (c/lam) sqrt(D/n))`` and
    ``Delta_n = 2 epsilon_n / (1 - epsilon_n)``.

    Raises
    ------
    BandUndefined
        If ``lambda_hat <= c_alpha sqrt(D/n)`` or ``epsilon_n >= 1``.
    """
    if c_alpha < 0:
        raise ValueError("c_alpha must be non-negative")
    r = math.sqrt(D / n)
    if not lambda_hat > c_alpha * r:
        raise BandUndefined(
            f"smallest eigenvalue {lambda_hat:.4g} <= c_alpha*sqrt(D/n) = {c_alpha * r:.4g}"
        )
    eps = (c_alpha / lambda_hat**2) * r / (1.0 - (c_alpha / lambda_hat) * r)
    if not eps < 1:
        raise BandUndefined(f"epsilon_n = {eps:.4g} >= 1; the band is undefined")
    return eps, 2.0 * eps / (1.0 - eps)


def finite_sample_graph(X, alpha, c_alpha):
    """Band ``theta_hat +- Delta_n`` from a bound on ``||S - Sigma||``.

    ``c_alpha`` must satisfy ``P(||S - Sigma|| > c_alpha sqrt(D/n)) <= alpha``
    for the data-generating distribution; it is not estimated here, and
    the guarantee is only as good as that choice.
    """
    data = _as_data(X)
    n, D = data.values.shape
    S = sample_covariance(data.values)
    Omega = precision(S)
    Theta = partial_correlations(Omega)
    eps, delta = finite_sample_width(Omega.source_min_eigenvalue, c_alpha, D, n)
    band = FiniteSampleBand(Theta, delta, eps, c_alpha, Omega.source_min_eigenvalue)
    center = offdiag(np.asarray(Theta))
    rect = ConfidenceRectangle.from_half_width(
        center, delta, alpha, "finite_sample", n,
        info={"epsilon_n": eps, "delta_n": delta, "c_alpha": c_alpha},
    )
    return band, graph_from_rectangle(rect, data.labels, 0.0, dict(rect.info))


# ---------------------------------------------------------------------------
# checking against the truth


@dataclass(frozen=True)
class GuaranteeCheck:
    false_edges: int
    missed_edges: int
    any_false: bool
    true_edges: int
    found_edges: int


def graph_guarantee_check(G_hat, G_true):
    """Count false and missed edges of ``G_hat`` relative to ``G_true``."""
    if G_hat.num_nodes != G_true.num_nodes:
        raise NodeMismatch(
            f"estimated graph has {G_hat.num_nodes} nodes, truth has {G_true.num_nodes}"
        )
    est, true = G_hat.edge_set(), G_true.edge_set()
    false = len(est - true)
    return GuaranteeCheck(
        false_edges=false,
        missed_edges=len(true - est),
        any_false=false > 0,
        true_edges=len(true),
        found_edges=len(est & true),
    )


def truth_graph(edges, D, labels=None, method="truth"):
    """Wrap a known edge set as a :class:`GraphEstimate` for checking."""
    return GraphEstimate(
        node_labels=tuple(labels or (str(i + 1) for i in range(D))),
        edges=tuple(edges),
        per_pair={},
        alpha=None,
        method=method,
        n=0,
    )
