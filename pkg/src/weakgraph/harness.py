"""Monte Carlo coverage experiments.

Each replicate samples a data set from a model, estimates a graph and
compares it with the true graph for the same target.  Replicate ``r``
uses the seed derived from ``(seed, r)``, so reports do not depend on the
number of worker processes.
"""
import csv
import io as _io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import stats

from . import rng as _rng
from .errors import WeakGraphError
from .estimators import (
    ClusterAssignment,
    cluster_graph,
    cluster_true_theta,
    correlation_graph,
    finite_sample_graph,
    graph_guarantee_check,
    partial_corr_graph,
    restricted_graph,
    restricted_partial_corr_matrix,
    truth_graph,
)
from .linalg import pair_indices, sample_correlations
from .models import CONVENTIONS, ModelSpec, ground_truth, sample

__all__ = [
    "METHODS",
    "ExperimentConfig",
    "CoverageReport",
    "estimate_graph",
    "true_edges",
    "run_coverage",
    "clopper_pearson",
]

METHODS = ("delta", "bootstrap", "super", "corr", "cluster", "restricted", "finite")

_PC_NAMES = {"delta": "delta", "bootstrap": "bootstrap", "super": "super_accurate"}


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    n: int
    alpha: float = 0.1
    method: str = "bootstrap"
    reps: int = 100
    seed: int = 0
    B: int = 1000
    L: int = None
    epsilon: float = 0.0
    c_alpha: float = None
    multiplicity: str = "paper_D2"
    t_estimator: str = "gaussian_plugin"
    super_variant: str = "reuse_reps"
    N: int = 2000
    cluster_method: str = "bootstrap"
    distance_kind: str = "one_minus_abs_corr"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.method in ("cluster", "restricted") and self.L is None:
            raise ValueError(f"method {self.method!r} needs L")
        if self.method == "finite" and self.c_alpha is None:
            raise ValueError("method 'finite' needs c_alpha")

    def method_options(self):
        return {f.name: getattr(self, f.name) for f in fields(self)
                if f.name not in ("model", "n", "alpha", "method", "reps", "seed")}

    def to_dict(self):
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        model = d.pop("model")
        if not isinstance(model, ModelSpec):
            model = ModelSpec.from_dict(model)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(model=model, **d)


def estimate_graph(X, method, alpha, seed=0, workers=1, **opts):
    """Run one of the graph estimators by its short name.

    ``opts`` may hold any :class:`ExperimentConfig` method option; the ones
    irrelevant to ``method`` are ignored.
    """
    B = opts.get("B", 1000)
    if method in _PC_NAMES:
        return partial_corr_graph(
            X, alpha, _PC_NAMES[method], B=B, seed=seed, workers=workers,
            multiplicity=opts.get("multiplicity", "paper_D2"),
            t_estimator=opts.get("t_estimator", "gaussian_plugin"),
            super_variant=opts.get("super_variant", "reuse_reps"),
            N=opts.get("N", 2000),
        )
    if method == "corr":
        return correlation_graph(X, alpha, opts.get("epsilon", 0.0), B, seed, workers)
    if method == "cluster":
        inner = _PC_NAMES.get(opts.get("cluster_method", "bootstrap"), opts.get("cluster_method"))
        extra = {}
        if inner == "delta":
            extra = {"multiplicity": opts.get("multiplicity", "paper_D2"),
                     "t_estimator": opts.get("t_estimator", "gaussian_plugin")}
        return cluster_graph(
            X, opts["L"], alpha, inner, seed,
            opts.get("distance_kind", "one_minus_abs_corr"), B, workers=workers, **extra,
        )
    if method == "restricted":
        return restricted_graph(X, opts["L"], alpha, B, seed, workers=workers)
    if method == "finite":
        return finite_sample_graph(X, alpha, opts["c_alpha"])[1]
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def _nonzero_pairs(M, tol=1e-12):
    M = np.asarray(M)
    j, k = pair_indices(M.shape[0])
    mask = np.abs(M[j, k]) > tol
    return [(int(a), int(b)) for a, b in zip(j[mask], k[mask])]


def true_edges(config, truth, graph):
    """Edge set of the target that ``graph`` estimates, under the model."""
    if config.method == "corr":
        R = np.asarray(sample_correlations(truth.sigma))
        return _nonzero_pairs(R, max(config.epsilon, 1e-12))
    if config.method == "restricted":
        return _nonzero_pairs(restricted_partial_corr_matrix(truth.sigma, config.L))
    if config.method == "cluster":
        assignment = ClusterAssignment(
            tuple(graph.meta["prototypes"]), tuple(graph.meta["cluster_of"]),
            config.distance_kind,
        )
        return _nonzero_pairs(cluster_true_theta(truth.sigma, assignment))
    return list(truth.edges)


def _run_rep(config, r):
    rep_seed = _rng.derive_seed(config.seed, _rng.REPLICATE, r)
    record = {"rep": r, "seed": rep_seed}
    start = time.perf_counter()
    try:
        X = sample(config.model, config.n, rep_seed)
        G = estimate_graph(X, config.method, config.alpha, rep_seed, **config.method_options())
        truth = ground_truth(config.model)
        T = truth_graph(true_edges(config, truth, G), G.num_nodes, G.node_labels)
        check = graph_guarantee_check(G, T)
        record.update(
            any_false=check.any_false,
            false_edges=check.false_edges,
            missed_edges=check.missed_edges,
            true_edges=check.true_edges,
            found_edges=check.found_edges,
            error=None,
        )
    except WeakGraphError as exc:
        record.update(
            any_false=None, false_edges=None, missed_edges=None,
            true_edges=None, found_edges=None,
            error=f"{type(exc).__name__}: {exc}",
        )
    record["runtime"] = time.perf_counter() - start
    return record


def _run_rep_star(args):
    return _run_rep(*args)


def clopper_pearson(k, n, level=0.95):
    """Exact binomial confidence interval for ``k`` successes in ``n``."""
    if n == 0:
        return (0.0, 1.0)
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return (lo, hi)


_RECORD_FIELDS = ("rep", "seed", "any_false", "false_edges", "missed_edges",
                  "true_edges", "found_edges", "error")


@dataclass(frozen=True)
class CoverageReport:
    """Per-replicate records and their aggregate.

    ``fwer_hat`` is the mean of ``any_false`` over replicates that
    completed; replicates that raised are counted in ``errors`` only.
    ``power_hat`` is the fraction of true edges found, pooled over
    completed replicates, and is ``None`` when there were no true edges.
    """

    config: ExperimentConfig
    records: tuple

    @property
    def completed(self):
        return [r for r in self.records if r["error"] is None]

    @property
    def errors(self):
        return len(self.records) - len(self.completed)

    @property
    def fwer_hat(self):
        done = self.completed
        if not done:
            return None
        return float(np.mean([bool(r["any_false"]) for r in done]))

    @property
    def ci_95(self):
        done = self.completed
        return clopper_pearson(sum(bool(r["any_false"]) for r in done), len(done))

    @property
    def power_hat(self):
        done = self.completed
        total = sum(r["true_edges"] for r in done)
        if total == 0:
            return None
        return sum(r["found_edges"] for r in done) / total

    def to_dict(self, include_runtime=False):
        keys = _RECORD_FIELDS + (("runtime",) if include_runtime else ())
        return {
            "config": self.config.to_dict(),
            "conventions": dict(CONVENTIONS),
            "reps": len(self.records),
            "completed": len(self.completed),
            "errors": self.errors,
            "fwer_hat": self.fwer_hat,
            "fwer_ci_95": list(self.ci_95),
            "power_hat": self.power_hat,
            "records": [{k: r[k] for k in keys} for r in self.records],
        }

    def to_csv(self):
        """Tidy per-replicate table, one row per replicate."""
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = _RECORD_FIELDS + ("runtime",)
        w.writerow(cols)
        for r in self.records:
            w.writerow(["" if r[c] is None else r[c] for c in cols])
        return buf.getvalue()

    def table(self):
        """Short human-readable summary."""
        c = self.config
        fmt = lambda x: "n/a" if x is None else f"{x:.3f}"  # noqa: E731
        lo, hi = self.ci_95
        lines = [
            f"model      {c.model.kind} (D={c.model.D})",
            f"method     {c.method}   n={c.n}   alpha={c.alpha}",
            f"reps       {len(self.records)} ({self.errors} failed)",
            f"fwer_hat   {fmt(self.fwer_hat)}   95% CI [{lo:.3f}, {hi:.3f}]",
            f"power_hat  {fmt(self.power_hat)}",
        ]
        return "\n".join(lines)


def run_coverage(config, workers=1):
    """Run ``config.reps`` independent replicates.

    Parameters
    ----------
    config : ExperimentConfig
    workers : int
        Number of worker processes; results are identical for any value.

    Returns
    -------
    CoverageReport
    """
    # validate the model once up front so a bad spec fails fast
    ground_truth(config.model)
    jobs = [(config, r) for r in range(config.reps)]
    if workers and workers > 1 and config.reps > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_rep_star, jobs, chunksize=max(1, config.reps // (4 * workers))))
    else:
        records = [_run_rep_star(j) for j in jobs]
    return CoverageReport(config, tuple(records))
