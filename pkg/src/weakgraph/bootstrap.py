"""Nonparametric bootstrap for max-norm confidence rectangles.

For a vector statistic ``theta_hat`` the rectangle is
``{theta : ||theta - theta_hat||_inf <= Z_alpha / sqrt(n)}`` with
``Z_alpha`` the ``ceil((1 - alpha) B)``-th order statistic of
``sqrt(n) ||theta*_b - theta_hat||_inf`` over ``B`` resamples.

Replicate ``b`` draws its rows from the substream keyed by
``(seed, b, attempt)``, so the replicate set does not depend on chunking
or on the number of worker threads.  A resample on which the statistic
is undefined (for example a singular resampled covariance) is redrawn
with the next ``attempt``.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng as _rng
from .errors import AllDrawsNonPD, TooManyDegenerateResamples
from .linalg import (
    offdiag,
    partial_correlations,
    precision,
    sample_correlations,
    sample_covariance,
)
from .rectangle import ConfidenceRectangle

__all__ = [
    "StatisticSpec",
    "partial_correlation_statistic",
    "correlation_statistic",
    "covariance_statistic",
    "batch_covariance",
    "batch_partial_correlations",
    "resample",
    "bootstrap_replicates",
    "bootstrap_max_quantile",
    "bootstrap_rectangle",
    "order_statistic_quantile",
    "SuperAccurateResult",
    "super_accurate_intervals",
]

DEFAULT_B = 1000
MAX_ATTEMPT_FACTOR = 10
_CHUNK_ELEMENTS = 4_000_000


# ---------------------------------------------------------------------------
# batched statistics


def batch_covariance(Xb):
    """Covariances (divisor n) of a stack of data sets, shape ``(B, D, D)``."""
    Xc = Xb - Xb.mean(axis=1, keepdims=True)
    return np.matmul(np.swapaxes(Xc, 1, 2), Xc) / Xb.shape[1]


def _batch_precision(Sb, rel_tol=1e-10):
    evals = np.linalg.eigvalsh(Sb)
    ok = evals[:, 0] > rel_tol * np.maximum(evals[:, -1], 0.0)
    Om = np.full_like(Sb, np.nan)
    if np.any(ok):
        Om[ok] = np.linalg.inv(Sb[ok])
    return Om, ok


def batch_partial_correlations(Sb):
    """Off-diagonal partial correlations for a stack of covariances.

    Returns ``(values, ok)``; rows with ``ok == False`` came from
    numerically singular matrices and hold NaN.
    """
    Om, ok = _batch_precision(Sb)
    d = np.sqrt(np.abs(np.diagonal(Om, axis1=1, axis2=2)))
    theta = -Om / (d[:, :, None] * d[:, None, :])
    vals = np.clip(offdiag(theta), -1.0, 1.0)
    vals[~ok] = np.nan
    return vals, ok


def _batch_correlations(Sb):
    d = np.diagonal(Sb, axis1=1, axis2=2)
    ok = np.all(d > 0, axis=1)
    r = 1.0 / np.sqrt(np.where(d > 0, d, np.nan))
    R = Sb * r[:, :, None] * r[:, None, :]
    vals = np.clip(offdiag(R), -1.0, 1.0)
    vals[~ok] = np.nan
    return vals, ok


@dataclass(frozen=True)
class StatisticSpec:
    """A vector statistic of a data matrix, in serial and batched form.

    ``extractor`` maps an ``(n, D)`` array to a vector and raises a
    :class:`~weakgraph.errors.WeakGraphError` when the statistic is
    undefined.  ``batch`` maps an ``(B, n, D)`` stack to ``(values, ok)``.
    """

    kind: str
    extractor: Callable
    batch: Callable
    params: dict = field(default_factory=dict)


def _pc_extract(X):
    return offdiag(np.asarray(partial_correlations(precision(sample_covariance(X)))))


def _pc_batch(Xb):
    return batch_partial_correlations(batch_covariance(Xb))


def partial_correlation_statistic():
    return StatisticSpec("partial_correlations", _pc_extract, _pc_batch)


def _corr_extract(X):
    return offdiag(np.asarray(sample_correlations(sample_covariance(X))))


def _corr_batch(Xb):
    return _batch_correlations(batch_covariance(Xb))


def correlation_statistic():
    return StatisticSpec("correlations", _corr_extract, _corr_batch)


def _cov_extract(X):
    S = np.asarray(sample_covariance(X))
    j, k = np.triu_indices(S.shape[0])
    return S[j, k]


def _cov_batch(Xb):
    Sb = batch_covariance(Xb)
    j, k = np.triu_indices(Sb.shape[1])
    return Sb[:, j, k], np.ones(Sb.shape[0], dtype=bool)


def covariance_statistic():
    """Distinct covariance entries (upper triangle with diagonal)."""
    return StatisticSpec("covariances", _cov_extract, _cov_batch)


# ---------------------------------------------------------------------------
# resampling engine


def resample(X, generator):
    """Draw ``n`` rows of ``X`` uniformly with replacement."""
    X = np.asarray(X)
    idx = generator.integers(0, X.shape[0], size=X.shape[0])
    return X[idx]


def _indices(seed, n, keys):
    return np.stack(
        [_rng.substream(seed, _rng.BOOTSTRAP, b, a).integers(0, n, size=n) for b, a in keys]
    )


def _evaluate(X, spec, seed, keys, workers):
    n, D = X.shape
    chunk = max(1, _CHUNK_ELEMENTS // (n * D))
    parts = [keys[i : i + chunk] for i in range(0, len(keys), chunk)]

    def run(part):
        idx = _indices(seed, n, part)
        return spec.batch(X[idx])

    if workers and workers > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, parts))
    else:
        results = [run(p) for p in parts]
    vals = np.concatenate([r[0] for r in results], axis=0)
    ok = np.concatenate([r[1] for r in results], axis=0)
    return vals, ok


def bootstrap_replicates(X, spec, B, seed, workers=1):
    """Statistic values on ``B`` valid resamples.

    Returns
    -------
    reps : ndarray, shape (B, m)
    draws : int
        Total number of resamples drawn, including redrawn degenerate ones.

    Raises
    ------
    TooManyDegenerateResamples
        If more than ``10 B`` draws would be needed.
    """
    X = np.asarray(X, dtype=float)
    if B < 1:
        raise ValueError("B must be positive")
    reps = None
    pending = np.arange(B)
    attempt = 0
    draws = 0
    while pending.size:
        if draws + pending.size > MAX_ATTEMPT_FACTOR * B:
            raise TooManyDegenerateResamples(
                f"{pending.size} of {B} bootstrap replicates still degenerate after "
                f"{draws} draws; the statistic is undefined on most resamples"
            )
        keys = [(int(b), attempt) for b in pending]
        vals, ok = _evaluate(X, spec, seed, keys, workers)
        draws += pending.size
        if reps is None:
            reps = np.full((B, vals.shape[1]), np.nan)
        reps[pending[ok]] = vals[ok]
        pending = pending[~ok]
        attempt += 1
    return reps, draws


def order_statistic_quantile(values, alpha):
    """The ``ceil((1 - alpha) B)``-th smallest value (1-based, at least 1st)."""
    values = np.sort(np.asarray(values, dtype=float))
    B = values.shape[0]
    k = math.ceil((1.0 - alpha) * B - 1e-9)
    k = min(max(k, 1), B)
    return float(values[k - 1])


def _max_deviation(reps, center, n):
    return np.sqrt(n) * np.max(np.abs(reps - center[None, :]), axis=1)


def bootstrap_max_quantile(X, spec, B, alpha, seed, workers=1):
    """``Z_alpha`` for the max-norm bootstrap rectangle of ``spec``."""
    if B < 100:
        raise ValueError("use at least B = 100 bootstrap replicates")
    X = np.asarray(X, dtype=float)
    center = np.asarray(spec.extractor(X), dtype=float)
    reps, _ = bootstrap_replicates(X, spec, B, seed, workers)
    return order_statistic_quantile(_max_deviation(reps, center, X.shape[0]), alpha)


def bootstrap_rectangle(X, spec, alpha, B=DEFAULT_B, seed=0, workers=1):
    """Max-norm bootstrap rectangle centred at ``spec.extractor(X)``."""
    if B < 100:
        raise ValueError("use at least B = 100 bootstrap replicates")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    center = np.asarray(spec.extractor(X), dtype=float)
    reps, draws = bootstrap_replicates(X, spec, B, seed, workers)
    Z = order_statistic_quantile(_max_deviation(reps, center, n), alpha)
    return ConfidenceRectangle.from_half_width(
        center, Z / np.sqrt(n), alpha, "bootstrap", n,
        info={"Z_alpha": Z, "B": B, "draws": draws, "statistic": spec.kind},
    )


# ---------------------------------------------------------------------------
# super-accurate bootstrap


@dataclass(frozen=True)
class SuperAccurateResult:
    rectangle: ConfidenceRectangle
    covariance_half_width: float
    retained: int
    candidates: int
    variant: str

    @property
    def retention_rate(self):
        return self.retained / self.candidates if self.candidates else 1.0


def _vech_to_matrices(vals, D):
    j, k = np.triu_indices(D)
    M = np.zeros((vals.shape[0], D, D))
    M[:, j, k] = vals
    M[:, k, j] = vals
    return M


def super_accurate_intervals(
    X, alpha, B=DEFAULT_B, N=2000, variant="reuse_reps", seed=0, workers=1
):
    """Partial-correlation intervals from the image of a covariance rectangle.

    A ``1 - alpha`` max-norm bootstrap rectangle is built for the distinct
    covariance entries; each interval is the range of ``theta_j`` over
    points of that rectangle.  The points are either the bootstrap
    covariance replicates lying inside it (``"reuse_reps"``) or ``N``
    uniform draws from it (``"uniform_sample"``), keeping only positive
    definite ones.  The sample covariance itself is always included, so
    every interval contains the point estimate.

    Returns
    -------
    SuperAccurateResult
    """
    if variant not in ("reuse_reps", "uniform_sample"):
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "uniform_sample" and N < 100:
        raise ValueError("uniform_sample needs N >= 100")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    X = np.asarray(X, dtype=float)
    n, D = X.shape
    spec = covariance_statistic()
    s_hat = spec.extractor(X)
    theta_hat = _pc_extract(X)

    reps, _ = bootstrap_replicates(X, spec, B, seed, workers)
    Z = order_statistic_quantile(_max_deviation(reps, s_hat, n), alpha)
    h = Z / np.sqrt(n)

    if variant == "reuse_reps":
        inside = np.max(np.abs(reps - s_hat), axis=1) <= h
        points = reps[inside]
        candidates = B
    else:
        gen = _rng.substream(seed, _rng.UNIFORM_RECTANGLE)
        points = s_hat + gen.uniform(-h, h, size=(N, s_hat.shape[0]))
        candidates = N

    if points.shape[0]:
        vals, ok = batch_partial_correlations(_vech_to_matrices(points, D))
        vals = vals[ok]
    else:
        vals = np.empty((0, theta_hat.shape[0]))
    retained = vals.shape[0]
    if variant == "uniform_sample" and retained < 0.01 * candidates:
        raise AllDrawsNonPD(
            f"only {retained} of {candidates} uniform draws from the covariance "
            "rectangle were positive definite"
        )
    vals = np.vstack([theta_hat[None, :], vals])
    rect = ConfidenceRectangle(
        center=theta_hat,
        lower=vals.min(axis=0),
        upper=vals.max(axis=0),
        alpha=alpha,
        method="super_accurate",
        n=n,
        info={"Z_alpha": Z, "B": B, "variant": variant, "retained": retained},
    )
    return SuperAccurateResult(rect, h, retained, candidates, variant)
