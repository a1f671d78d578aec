"""Generative models with known graphs, used for simulation studies.

All innovations are i.i.d. standard Normal.  The models:

``dense(a)``
    Precision with unit diagonal and every off-diagonal entry ``a``.
``markov(a)``
    ``X_D = e_D``, ``X_j = a X_{j+1} + e_j``; a chain graph.
``sem(a)``
    ``X_1 = e_1``, ``X_j = a (X_1 + ... + X_{j-1}) + e_j``; a complete graph.
``null``
    Independent features.
``block(num_blocks, within_corr)``
    Block-diagonal covariance, equicorrelated within blocks.
``partial_markov(num_edges, a)``
    The Markov recursion with only the first ``num_edges`` couplings.
"""
from dataclasses import asdict, dataclass

import numpy as np

from . import rng as _rng
from .errors import NotPositiveDefinite
from .linalg import (
    CovMatrix,
    DataMatrix,
    PartialCorrMatrix,
    PrecisionMatrix,
    pair_indices,
    partial_correlations,
)

__all__ = ["MODEL_KINDS", "ModelSpec", "GroundTruth", "ground_truth", "sample"]

MODEL_KINDS = ("dense", "markov", "sem", "null", "block", "partial_markov")

#: conventions not fixed by the model definitions; recorded in experiment output
CONVENTIONS = {
    "innovations": "iid standard normal",
    "dense_precision_diagonal": 1.0,
}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    D: int
    a: float = 0.9
    num_blocks: int = 4
    within_corr: float = 0.5
    num_edges: int = 10

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; choose from {MODEL_KINDS}")
        if self.D < 2:
            raise ValueError("models need D >= 2")
        if self.kind == "dense" and not 0 < self.a < 1:
            raise NotPositiveDefinite(
                f"dense model needs 0 < a < 1 with unit diagonal, got a={self.a}"
            )
        if self.kind == "block":
            if not 1 <= self.num_blocks <= self.D:
                raise ValueError("num_blocks must lie in [1, D]")
            lam = np.linalg.eigvalsh(_block_covariance(self.D, self.num_blocks, self.within_corr))[0]
            if not lam > 0:
                raise NotPositiveDefinite(
                    f"within_corr={self.within_corr} gives lambda_min={lam:.3g}"
                )
        if self.kind == "partial_markov" and not 0 <= self.num_edges <= self.D - 1:
            raise ValueError("partial_markov needs 0 <= num_edges <= D - 1")

    def to_dict(self):
        """Only the fields that matter for this kind."""
        d = {"kind": self.kind, "D": self.D}
        if self.kind in ("dense", "markov", "sem", "partial_markov"):
            d["a"] = self.a
        if self.kind == "block":
            d["num_blocks"] = self.num_blocks
            d["within_corr"] = self.within_corr
        if self.kind == "partial_markov":
            d["num_edges"] = self.num_edges
        return d

    @classmethod
    def from_dict(cls, d):
        fields = set(asdict(cls("null", 2)))
        unknown = set(d) - fields
        if unknown:
            raise ValueError(f"unknown model fields {sorted(unknown)}")
        return cls(**d)


def _coupling_matrix(spec):
    """``A`` with ``X = A X + e`` for the recursive models."""
    D, a = spec.D, spec.a
    A = np.zeros((D, D))
    if spec.kind == "markov":
        A[np.arange(D - 1), np.arange(1, D)] = a
    elif spec.kind == "partial_markov":
        m = spec.num_edges
        A[np.arange(m), np.arange(1, m + 1)] = a
    elif spec.kind == "sem":
        A[np.tril_indices(D, -1)] = a
    return A


def _block_sizes(D, num_blocks):
    size = D // num_blocks
    sizes = [size] * num_blocks
    sizes[-1] += D - size * num_blocks
    return sizes


def _covariance_and_precision(spec):
    D = spec.D
    if spec.kind in ("markov", "partial_markov", "sem"):
        IA = np.eye(D) - _coupling_matrix(spec)
        Omega = IA.T @ IA
        IA_inv = np.linalg.inv(IA)
        Sigma = IA_inv @ IA_inv.T
        return Sigma, Omega
    if spec.kind == "null":
        return np.eye(D), np.eye(D)
    if spec.kind == "dense":
        Omega = np.full((D, D), spec.a)
        np.fill_diagonal(Omega, 1.0)
        return np.linalg.inv(Omega), Omega
    Sigma = _block_covariance(D, spec.num_blocks, spec.within_corr)
    return Sigma, np.linalg.inv(Sigma)


def _block_covariance(D, num_blocks, within_corr):
    Sigma = np.zeros((D, D))
    start = 0
    for size in _block_sizes(D, num_blocks):
        sl = slice(start, start + size)
        Sigma[sl, sl] = within_corr
        start += size
    np.fill_diagonal(Sigma, 1.0)
    return Sigma


@dataclass(frozen=True)
class GroundTruth:
    spec: ModelSpec
    sigma: CovMatrix
    omega: PrecisionMatrix
    theta: PartialCorrMatrix
    edges: tuple

    def adjacency(self):
        D = self.spec.D
        A = np.zeros((D, D), dtype=bool)
        for j, k in self.edges:
            A[j, k] = A[k, j] = True
        return A


def ground_truth(spec):
    """Covariance, precision, partial correlations and edge set of a model."""
    Sigma, Omega = _covariance_and_precision(spec)
    Sigma = 0.5 * (Sigma + Sigma.T)
    Omega = 0.5 * (Omega + Omega.T)
    lam = np.linalg.eigvalsh(Sigma)[0]
    if not lam > 0:
        raise NotPositiveDefinite(f"model covariance has lambda_min={lam:.3g}")
    theta = partial_correlations(Omega)
    j, k = pair_indices(spec.D)
    mask = np.abs(np.asarray(theta)[j, k]) > 1e-12
    edges = tuple((int(a), int(b)) for a, b in zip(j[mask], k[mask]))
    return GroundTruth(
        spec=spec,
        sigma=CovMatrix(Sigma),
        omega=PrecisionMatrix(Omega, float(lam)),
        theta=theta,
        edges=edges,
    )


def sample(spec, n, seed):
    """Draw ``n`` observations from the model.

    The recursive models are generated by running their recursions; the
    others as ``Sigma^{1/2} z`` with the symmetric square root.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    gen = _rng.substream(seed, _rng.SAMPLE)
    D = spec.D
    eps = gen.standard_normal((n, D))
    if spec.kind in ("markov", "partial_markov"):
        A = _coupling_matrix(spec)
        X = np.empty((n, D))
        X[:, D - 1] = eps[:, D - 1]
        for j in range(D - 2, -1, -1):
            X[:, j] = A[j, j + 1] * X[:, j + 1] + eps[:, j]
    elif spec.kind == "sem":
        X = np.empty((n, D))
        running = np.zeros(n)
        for j in range(D):
            X[:, j] = spec.a * running + eps[:, j] if j else eps[:, 0]
            running += X[:, j]
    else:
        Sigma, _ = _covariance_and_precision(spec)
        w, V = np.linalg.eigh(Sigma)
        root = (V * np.sqrt(np.clip(w, 0, None))) @ V.T
        X = eps @ root
    return DataMatrix(X)
