import numpy as np
import pytest

from weakgraph.errors import NotPositiveDefinite
from weakgraph.linalg import pair_indices, sample_covariance
from weakgraph.models import MODEL_KINDS, ModelSpec, ground_truth, sample

from conftest import MARKOV3_OMEGA


def test_null_truth():
    gt = ground_truth(ModelSpec("null", 5))
    np.testing.assert_array_equal(np.asarray(gt.sigma), np.eye(5))
    np.testing.assert_array_equal(np.asarray(gt.omega), np.eye(5))
    assert gt.edges == ()


def test_markov_truth_by_hand():
    gt = ground_truth(ModelSpec("markov", 3, a=0.9))
    np.testing.assert_allclose(np.asarray(gt.omega), MARKOV3_OMEGA, atol=1e-12)
    assert gt.edges == ((0, 1), (1, 2))
    S = np.asarray(gt.sigma)
    # X3 = e3, X2 = .9 X3 + e2, X1 = .9 X2 + e1
    assert S[1, 1] == pytest.approx(1.81)
    assert S[0, 2] == pytest.approx(0.81)


def test_dense_truth():
    gt = ground_truth(ModelSpec("dense", 4, a=0.5))
    assert len(gt.edges) == 6
    w = np.linalg.eigvalsh(np.asarray(gt.omega))
    np.testing.assert_allclose(w, [0.5, 0.5, 0.5, 2.5])


def test_dense_requires_unit_interval():
    with pytest.raises(NotPositiveDefinite):
        ModelSpec("dense", 4, a=1.2)


def test_block_must_be_pd():
    with pytest.raises(NotPositiveDefinite):
        ModelSpec("block", 8, num_blocks=2, within_corr=-0.5)
    gt = ground_truth(ModelSpec("block", 10, num_blocks=3))
    S = np.asarray(gt.sigma)
    # sizes 3, 3, 4
    assert S[0, 2] == 0.5 and S[2, 3] == 0.0 and S[6, 9] == 0.5


def test_partial_markov_edges():
    gt = ground_truth(ModelSpec("partial_markov", 15, a=0.9, num_edges=10))
    assert gt.edges == tuple((j, j + 1) for j in range(10))


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_truth_consistent(kind):
    gt = ground_truth(ModelSpec(kind, 6, a=0.5, num_blocks=2, num_edges=3))
    assert np.abs(np.asarray(gt.omega) @ np.asarray(gt.sigma) - np.eye(6)).max() < 1e-8
    A = gt.adjacency()
    np.testing.assert_array_equal(A, A.T)


def test_markov_partial_correlations_exact_chain():
    for D in (3, 6, 10):
        gt = ground_truth(ModelSpec("markov", D, a=0.9))
        Theta = np.asarray(gt.theta)
        j, k = pair_indices(D)
        chain = k == j + 1
        assert np.all(np.abs(Theta[j[chain], k[chain]]) > 1e-10)
        assert np.all(np.abs(Theta[j[~chain], k[~chain]]) < 1e-12)


@pytest.mark.parametrize("D", range(2, 7))
def test_sem_is_complete(D):
    gt = ground_truth(ModelSpec("sem", D, a=0.9))
    assert len(gt.edges) == D * (D - 1) // 2


def test_null_sample_means():
    X = np.asarray(sample(ModelSpec("null", 5), 10**5, 0))
    assert np.all(np.abs(X.mean(axis=0)) < 0.02)


def test_markov_sample_covariance():
    X = sample(ModelSpec("markov", 3, a=0.9), 10**5, 1)
    S = np.asarray(sample_covariance(X))
    assert S[0, 2] == pytest.approx(0.81, rel=0.03)


def test_sample_deterministic():
    spec = ModelSpec("sem", 4, a=0.3)
    np.testing.assert_array_equal(np.asarray(sample(spec, 50, 9)), np.asarray(sample(spec, 50, 9)))
    assert not np.array_equal(np.asarray(sample(spec, 50, 9)), np.asarray(sample(spec, 50, 10)))


@pytest.mark.parametrize(
    "spec",
    [
        ModelSpec("dense", 8, a=0.3),
        ModelSpec("markov", 10, a=0.9),
        ModelSpec("sem", 5, a=0.3),
        ModelSpec("null", 10),
        ModelSpec("block", 9, num_blocks=3),
        ModelSpec("partial_markov", 10, num_edges=4),
    ],
)
def test_sample_covariance_converges(spec):
    n = 10**5
    S = np.asarray(sample_covariance(sample(spec, n, 2)))
    Sigma = np.asarray(ground_truth(spec).sigma)
    # relative to the scale of the covariance, which for sem grows with D
    scale = np.sqrt(np.outer(np.diag(Sigma), np.diag(Sigma)))
    assert np.abs((S - Sigma) / scale).max() <= 5 * np.sqrt(np.log(spec.D) / n)


def test_spec_round_trip():
    spec = ModelSpec("block", 12, num_blocks=3, within_corr=0.4)
    assert ModelSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        ModelSpec.from_dict({"kind": "null", "D": 3, "bogus": 1})
    with pytest.raises(ValueError):
        ModelSpec("nope", 3)
