import numpy as np
import pytest

from hyperdual import tensor as T
from hyperdual.tensor import Tensor

from conftest import grad_close, numeric_grad


def leaf(a):
    return Tensor(np.array(a, dtype=float), requires_grad=True)


# ----------------------------------------------------------------------------
# worked examples


def test_matmul_examples():
    a = Tensor([[1, 2], [3, 4]])
    assert np.array_equal(T.matmul(a, Tensor(np.eye(2))).data, [[1, 2], [3, 4]])
    assert T.matmul(Tensor([[1, 2]]), Tensor([[3], [4]])).item() == 11


def test_matmul_gradient_example():
    a = leaf([[1, 2], [3, 4]])
    T.sum(T.matmul(a, Tensor(np.ones((2, 2))))).backward()
    assert np.allclose(a.grad, [[2, 2], [2, 2]])


def test_matmul_shape_mismatch():
    with pytest.raises(T.DimensionError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_elementwise_examples():
    assert np.allclose(T.leaky_relu(Tensor([[-1, 2]]), 0.2).data, [[-0.2, 2]])
    assert T.elu(Tensor(0.0)).item() == 0.0
    x = leaf([[-1.0]])
    T.sum(T.elu(x)).backward()
    assert x.grad[0, 0] == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_log_is_clamped():
    assert T.log(Tensor([[0.0]])).item() == pytest.approx(np.log(T.EPS))
    x = leaf([[0.0, 2.0]])
    T.sum(T.log(x)).backward()
    assert x.grad[0, 0] == 0.0 and x.grad[0, 1] == pytest.approx(0.5)


def test_masked_softmax_examples():
    out = T.masked_softmax(Tensor([[0.0, 0.0]]), np.ones((1, 2), bool))
    assert np.allclose(out.data, [[0.5, 0.5]])
    out = T.masked_softmax(Tensor([[1.0, 1000.0]]), np.ones((1, 2), bool))
    assert np.all(np.isfinite(out.data)) and out.data[0, 1] == pytest.approx(1.0)
    out = T.masked_softmax(Tensor([[1.0, 2.0, 3.0]]), np.array([[1, 0, 1]], bool))
    e2 = np.exp(2.0)
    assert np.allclose(out.data, [[1 / (1 + e2), 0.0, e2 / (1 + e2)]], atol=1e-15)
    assert out.data[0, 1] == 0.0


def test_masked_softmax_degenerate_slice():
    with pytest.raises(T.DegenerateNeighborhoodError):
        T.masked_softmax(Tensor([[1.0, 2.0]]), np.zeros((1, 2), bool))


def test_reduction_examples():
    assert T.frobenius_norm_sq(Tensor([[1, 2], [2, 1]])).item() == 10
    assert T.trace(Tensor([[3, 9], [7, 5]])).item() == 8
    assert np.allclose(T.row_l2_normalize(Tensor([[3, 4]])).data, [[0.6, 0.8]])
    with pytest.raises(T.DimensionError):
        T.trace(Tensor(np.ones((2, 3))))


def test_backward_examples():
    x = leaf([[1, 2], [3, 4]])
    T.sum(x).backward()
    assert np.array_equal(x.grad, np.ones((2, 2)))
    x = leaf([[1, 2]])
    T.frobenius_norm_sq(x).backward()
    assert np.allclose(x.grad, [[2, 4]])


def test_backward_twice_is_an_error():
    x = leaf([[1.0]])
    loss = T.sum(T.square(x))
    loss.backward()
    with pytest.raises(RuntimeError):
        loss.backward()


def test_backward_needs_scalar():
    with pytest.raises(T.DimensionError):
        T.square(leaf([[1.0, 2.0]])).backward()


def test_non_finite_results_raise():
    with pytest.raises(T.NonFiniteError):
        T.exp(Tensor([[1000.0]]))
    with pytest.raises(T.NonFiniteError):
        Tensor([[np.nan]])


def test_scalar_broadcast_only():
    a = Tensor(np.ones((2, 2)))
    assert np.array_equal(T.add(a, 1.0).data, 2 * np.ones((2, 2)))
    with pytest.raises(T.DimensionError):
        T.add(a, Tensor(np.ones((1, 2))))


# ----------------------------------------------------------------------------
# finite-difference sweep over every differentiable primitive


def _unary_cases(rng):
    n, m = rng.integers(1, 9, size=2)
    pos = rng.uniform(0.2, 2.0, (n, m))
    sq = rng.standard_normal((n, n))
    return [
        ("scale", rng.standard_normal((n, m)), lambda a: T.scale(a, -1.7)),
        ("leaky_relu", rng.standard_normal((n, m)), T.leaky_relu),
        ("elu", rng.standard_normal((n, m)), T.elu),
        ("exp", rng.standard_normal((n, m)), T.exp),
        ("log", pos, T.log),
        ("square", rng.standard_normal((n, m)), T.square),
        ("power", pos, lambda a: T.power(a, -0.5)),
        ("transpose", rng.standard_normal((n, m)), T.transpose),
        ("reshape", rng.standard_normal((n, m)), lambda a: T.reshape(a, (m, n))),
        ("sum", rng.standard_normal((n, m)), T.sum),
        ("mean", rng.standard_normal((n, m)), T.mean),
        ("row_sum", rng.standard_normal((n, m)), T.row_sum),
        ("frobenius", rng.standard_normal((n, m)), T.frobenius_norm_sq),
        ("trace", sq, T.trace),
        ("row_l2_normalize", rng.standard_normal((n, m)) + 0.1, T.row_l2_normalize),
        ("masked_softmax_rows", rng.standard_normal((n, m)),
         lambda a: T.masked_softmax(a, np.ones(a.shape, bool), axis=1)),
        ("masked_softmax_cols", rng.standard_normal((n, m)),
         lambda a: T.masked_softmax(a, _mask(n, m, 0), axis=0)),
        ("const_mask", rng.standard_normal((n, m)), lambda a: T.const_mask(a, _mask(n, m, 1))),
    ]


def _mask(n, m, axis, seed=0):
    mask = np.random.default_rng(seed).random((n, m)) < 0.6
    if axis == 0:
        mask[0, :] = True
    else:
        mask[:, 0] = True
    return mask


def _weighted(out: Tensor, w: np.ndarray) -> Tensor:
    return T.sum(T.mul(out, Tensor(w)))


@pytest.mark.parametrize("seed", range(100))
def test_unary_primitives_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    for name, x0, op in _unary_cases(rng):
        x = leaf(x0)
        out = op(x)
        w = rng.standard_normal(out.shape)
        _weighted(out, w).backward()
        num = numeric_grad(lambda: _weighted(op(Tensor(x.data)), w).item(), x.data)
        assert grad_close(x.grad, num), name


@pytest.mark.parametrize("seed", range(100))
def test_binary_primitives_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n, k, m = rng.integers(1, 9, size=3)
    cases = [
        ("matmul", (n, k), (k, m), T.matmul),
        ("add", (n, m), (n, m), T.add),
        ("sub", (n, m), (n, m), T.sub),
        ("mul", (n, m), (n, m), T.mul),
        ("div", (n, m), (n, m), T.div),
        ("add_scalar", (n, m), (1, 1), T.add),
        ("mul_scalar", (n, m), (1, 1), T.mul),
        ("scale_rows", (n, m), (n, 1), T.scale_rows),
        ("concat_cols", (n, m), (n, k), lambda a, b: T.concat([a, b], axis=1)),
        ("concat_rows", (n, m), (k, m), lambda a, b: T.concat([a, b], axis=0)),
    ]
    for name, sa, sb, op in cases:
        a, b = leaf(rng.standard_normal(sa)), leaf(rng.uniform(0.5, 2.0, sb))
        out = op(a, b)
        w = rng.standard_normal(out.shape)
        _weighted(out, w).backward()
        for t in (a, b):
            num = numeric_grad(lambda: _weighted(op(Tensor(a.data), Tensor(b.data)), w).item(), t.data)
            assert grad_close(t.grad, num), name


@pytest.mark.parametrize("seed", range(100))
def test_indexed_primitives_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n, m, d = rng.integers(2, 9, size=3)
    dense = rng.random((n, m)) < 0.5
    dense[rng.integers(n), rng.integers(m)] = True
    r, c = np.nonzero(dense)
    pat = T.SparsePattern(r, c, (n, m))
    vals = leaf(rng.standard_normal((pat.nnz, 1)))
    xm = leaf(rng.standard_normal((m, d)))
    xn = leaf(rng.standard_normal((n, d)))
    seg = rng.integers(0, 4, size=pat.nnz)
    idx = rng.integers(0, n, size=7)
    cases = [
        ("spmm", lambda: T.spmm(vals, pat, xm), (vals, xm)),
        ("spmm_t", lambda: T.spmm(vals, pat, xn, transpose=True), (vals, xn)),
        ("pair_dot", lambda: T.pair_dot(xn, xm, pat.rows, pat.cols), (xn, xm)),
        ("gather_rows", lambda: T.gather_rows(xn, idx), (xn,)),
        ("take", lambda: T.take(xn, idx, idx % d), (xn,)),
        ("segment_sum", lambda: T.segment_sum(vals, seg, 4), (vals,)),
        ("segment_softmax", lambda: T.segment_softmax(vals, seg, 4), (vals,)),
        ("segment_max", lambda: T.segment_max(vals, seg, 4), (vals,)),
    ]
    for name, fn, leaves in cases:
        for t in leaves:
            t.zero_grad()
        out = fn()
        w = rng.standard_normal(out.shape)
        _weighted(out, w).backward()
        for t in leaves:
            def f():
                return float((fn().data * w).sum())
            num = numeric_grad(f, t.data)
            assert grad_close(t.grad, num), name


# ----------------------------------------------------------------------------
# invariants


@pytest.mark.parametrize("seed", range(30))
def test_masked_softmax_normalises_over_unmasked(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(1, 9, size=2)
    logits = rng.standard_normal((n, m)) * 5
    for axis in (0, 1):
        mask = _mask(n, m, axis, seed)
        out = T.masked_softmax(Tensor(logits), mask, axis=axis).data
        assert np.all(out[~mask] == 0.0)
        assert np.allclose(out.sum(axis=axis), 1.0, atol=1e-6)


def test_row_l2_normalize_norms_and_tiny_rows():
    x = np.array([[3.0, 4.0], [1e-13, 0.0], [0.0, 0.0], [-2.0, 5.0]])
    out = T.row_l2_normalize(Tensor(x)).data
    assert np.allclose(np.linalg.norm(out[[0, 3]], axis=1), 1.0, atol=1e-6)
    assert np.array_equal(out[1:3], x[1:3])


def test_shared_subexpression_accumulates():
    rng = np.random.default_rng(3)
    x0 = rng.standard_normal((3, 3))
    x = leaf(x0)
    shared = T.square(x)
    T.sum(T.add(T.mul(shared, shared), T.scale(shared, 3.0))).backward()
    # duplicated-subgraph oracle: build the two uses from independent copies
    a, b = leaf(x0), leaf(x0)
    T.sum(T.add(T.mul(T.square(a), T.square(a)), T.scale(T.square(b), 3.0))).backward()
    assert np.allclose(x.grad, a.grad + b.grad, atol=1e-12)


def test_every_reachable_leaf_gets_a_gradient():
    a, b, unused = leaf([[1.0, 2.0]]), leaf([[3.0], [4.0]]), leaf([[1.0]])
    T.sum(T.matmul(a, b)).backward()
    assert a.grad is not None and b.grad is not None and unused.grad is None


def test_record_registers_custom_op():
    x = leaf([[1.0, 2.0]])
    y = T.record(x.data * 3, (x,), lambda g: (3 * g,), "triple")
    T.sum(y).backward()
    assert np.array_equal(x.grad, [[3.0, 3.0]])
