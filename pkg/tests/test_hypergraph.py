import numpy as np
import pytest

from hyperdual import tensor as T
from hyperdual.hypergraph import (
    Incidence,
    IncidenceError,
    connectivity_penalty,
    degrees,
    knn_hypergraph,
    knn_indices,
    laplacian_quadratic,
    propagate_to_hyperedges,
    propagate_to_nodes,
    read_incidence,
    write_incidence,
)
from hyperdual.tensor import Tensor

import oracles as O
from conftest import grad_close, numeric_grad


def random_incidence(rng, n, m=None, weighted=True):
    """Random incidence with a guaranteed diagonal so no row or column is empty."""
    m = n if m is None else m
    h = (rng.random((n, m)) < 0.4).astype(float)
    if weighted:
        h *= rng.uniform(0.05, 1.0, (n, m))
    for i in range(max(n, m)):
        h[i % n, i % m] = rng.uniform(0.5, 1.0) if weighted else 1.0
    return h


# ----------------------------------------------------------------------------
# k-NN


def test_knn_collinear_example():
    h = knn_hypergraph(np.array([[0.0], [1.0], [10.0]]), 1).to_dense()
    assert [set(np.flatnonzero(h[:, k])) for k in range(3)] == [{0, 1}, {1, 0}, {2, 1}]


def test_knn_exhaustive_neighbourhood():
    x = np.random.default_rng(0).standard_normal((6, 3))
    assert np.all(knn_hypergraph(x, 5).to_dense() == 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_knn_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    centres = rng.standard_normal((4, 3)) * 3
    x = centres[rng.integers(0, 4, 100)] + rng.standard_normal((100, 3))
    assert np.array_equal(knn_indices(x, 5), O.knn_bruteforce(x, 5))


def test_knn_ties_broken_by_index():
    x = np.zeros((5, 2))
    assert np.array_equal(knn_indices(x, 2), [[1, 2], [0, 2], [0, 1], [0, 1], [0, 1]])


def test_knn_small_chunks_agree():
    x = np.random.default_rng(1).standard_normal((40, 4))
    assert np.array_equal(knn_indices(x, 7, chunk=3), knn_indices(x, 7))


def test_knn_rejects_k_at_least_n():
    with pytest.raises(ValueError):
        knn_hypergraph(np.zeros((3, 2)), 3)


def test_knn_is_deterministic():
    x = np.random.default_rng(2).standard_normal((30, 5))
    a, b = knn_hypergraph(x, 4), knn_hypergraph(x.copy(), 4)
    assert np.array_equal(a.to_dense(), b.to_dense())


# ----------------------------------------------------------------------------
# incidence and degrees


def test_degree_examples():
    d = degrees(Incidence.from_dense([[1, 0], [1, 1]]))
    assert np.array_equal(d.vertex_degrees, [1, 2]) and np.array_equal(d.hyperedge_degrees, [2, 1])
    d = degrees(Incidence.from_dense(np.eye(3)))
    assert np.array_equal(d.vertex_degrees, np.ones(3)) and np.array_equal(d.hyperedge_degrees, np.ones(3))


@pytest.mark.parametrize("seed", range(10))
def test_degrees_match_dense_sums(seed):
    h = random_incidence(np.random.default_rng(seed), 6, 4)
    d = degrees(Incidence.from_dense(h))
    dv, de = O.degrees(h)
    assert np.allclose(d.vertex_degrees, dv, atol=1e-14) and np.allclose(d.hyperedge_degrees, de, atol=1e-14)


def test_binary_degrees_are_integers():
    h = random_incidence(np.random.default_rng(4), 9, weighted=False)
    d = degrees(Incidence.from_dense(h))
    assert np.array_equal(d.vertex_degrees, np.round(d.vertex_degrees))


def test_incidence_validation():
    with pytest.raises(IncidenceError):
        Incidence.from_dense([[1.0, 0.0], [0.0, 0.0]])  # empty row and column
    with pytest.raises(IncidenceError):
        Incidence.from_dense([[1.5]])
    h = Incidence.from_dense([[0.5, 0.0], [0.0, 1.0]])
    assert h.nnz == 2  # zeros are not stored


# ----------------------------------------------------------------------------
# propagation


def test_propagation_examples():
    single = Incidence.from_dense([[1.0]])
    assert propagate_to_hyperedges(single, Tensor([[2.0]])).item() == 2.0
    assert propagate_to_nodes(single, Tensor([[5.0]])).item() == 5.0
    e = np.random.default_rng(0).standard_normal((3, 2))
    assert np.allclose(propagate_to_nodes(Incidence.from_dense(np.eye(3)), Tensor(e)).data, e)
    pair = Incidence.from_dense([[1.0], [1.0]])
    # De = 2, Dv = 1: (1 + 3) / sqrt(2)
    assert propagate_to_hyperedges(pair, Tensor([[1.0], [3.0]])).item() == pytest.approx(4 / np.sqrt(2))


@pytest.mark.parametrize("seed", range(20))
def test_propagation_matches_dense(seed):
    rng = np.random.default_rng(seed)
    h = random_incidence(rng, 8, 5)
    x0 = rng.standard_normal((8, 3))
    inc = Incidence.from_dense(h)
    e = propagate_to_hyperedges(inc, Tensor(x0)).data
    assert np.allclose(e, O.to_hyperedges(h, x0), atol=1e-12, rtol=0)
    assert np.allclose(propagate_to_nodes(inc, Tensor(e)).data, O.to_nodes(h, e), atol=1e-12, rtol=0)


@pytest.mark.parametrize("seed", range(20))
def test_round_trip_equals_laplacian(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 51))
    h = random_incidence(rng, n)
    x0 = rng.standard_normal((n, 2))
    inc = Incidence.from_dense(h)
    x = propagate_to_nodes(inc, propagate_to_hyperedges(inc, Tensor(x0))).data
    assert np.allclose(x, O.laplacian(h) @ x0, atol=1e-12, rtol=0)


def test_propagation_shape_checks():
    inc = Incidence.from_dense(np.eye(3))
    with pytest.raises(T.DimensionError):
        propagate_to_hyperedges(inc, Tensor(np.ones((2, 1))))


# ----------------------------------------------------------------------------
# Laplacian quadratic and connectivity


def test_laplacian_examples():
    eye = Incidence.from_dense(np.eye(2))
    assert laplacian_quadratic(eye, Tensor([[1.0], [2.0]])).item() == pytest.approx(5.0)
    h = Incidence.from_dense(random_incidence(np.random.default_rng(0), 4))
    assert laplacian_quadratic(h, Tensor(np.zeros((4, 2)))).item() == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_laplacian_matches_dense(seed):
    rng = np.random.default_rng(seed)
    h = random_incidence(rng, 7)
    x = rng.standard_normal((7, 3))
    got = laplacian_quadratic(Incidence.from_dense(h), Tensor(x)).item()
    assert got == pytest.approx(np.trace(x.T @ O.laplacian(h) @ x), abs=1e-10)


def test_connectivity_examples():
    assert connectivity_penalty(Incidence.from_dense(np.eye(4))).item() == pytest.approx(0.0, abs=1e-15)
    full = Incidence.from_dense(np.ones((5, 1)))
    assert connectivity_penalty(full).item() == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("seed", range(20))
def test_connectivity_matches_dense(seed):
    h = random_incidence(np.random.default_rng(seed), 6)
    assert connectivity_penalty(Incidence.from_dense(h)).item() == pytest.approx(O.connectivity(h), abs=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_gradients_through_incidence_weights(seed):
    rng = np.random.default_rng(seed)
    h = random_incidence(rng, 5)
    r, c = np.nonzero(h)
    w = Tensor(h[r, c].reshape(-1, 1), requires_grad=True)
    x = Tensor(rng.standard_normal((5, 2)), requires_grad=True)

    def loss(wt, xt):
        inc = Incidence(T.SparsePattern(r, c, h.shape), wt)
        return T.add(laplacian_quadratic(inc, xt), connectivity_penalty(inc))

    loss(w, x).backward()
    for leaf in (w, x):
        num = numeric_grad(lambda: loss(Tensor(w.data), Tensor(x.data)).item(), leaf.data)
        assert grad_close(leaf.grad, num)


# ----------------------------------------------------------------------------
# serialization


def test_incidence_text_round_trip(tmp_path):
    h = random_incidence(np.random.default_rng(5), 6, 4)
    path = tmp_path / "h.txt"
    write_incidence(Incidence.from_dense(h), path)
    lines = path.read_text().splitlines()
    assert lines[0].split() == ["6", "4", str(int((h != 0).sum()))]
    assert len(lines[1].split("\t")) == 3
    assert np.array_equal(read_incidence(path).to_dense(), h)
