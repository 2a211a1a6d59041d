"""Dense 2-D tensors with reverse-mode automatic differentiation.

Every operation produces a new :class:`Tensor`.  When any input requires a
gradient, the result remembers its parents and a closure mapping the upstream
gradient to gradients for those parents.  :meth:`Tensor.backward` sorts the
recorded graph topologically and sweeps it once in reverse.

All values are float64.  Results are checked for NaN/Inf after every
operation; a non-finite value raises :class:`NonFiniteError` immediately.

Sparse structures enter through :class:`SparsePattern`: a fixed set of
``(row, col)`` positions whose values live in an ``nnz x 1`` tensor, so a
weighted incidence matrix can carry gradients without being stored densely.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

EPS = 1e-12
LEAKY_SLOPE = 0.2

# rows of a gathered block materialised at once by pair_dot
_CHUNK_ELEMS = 1 << 22
# largest x @ y.T product pair_dot will form instead of gathering
_DENSE_PAIR_CELLS = 16_000_000


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf."""


class DegenerateNeighborhoodError(ValueError):
    """A softmax neighborhood has no unmasked entry."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op", "_spent")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise DimensionError(f"tensors are 2-D, got shape {arr.shape}")
        _check_finite(arr, "constructor")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.op = "leaf"
        self._spent = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.shape != (1, 1):
            raise DimensionError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``."""
        if self.shape != (1, 1):
            raise DimensionError(f"backward() needs a scalar loss, got shape {self.shape}")
        if not np.isfinite(self.data).all():
            raise NonFiniteError("backward() on a non-finite loss")
        if self._spent:
            raise RuntimeError("backward() already ran on this graph; rebuild it first")
        self._spent = True
        if not self.requires_grad:
            return

        order = _topological(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones((1, 1))}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> Tensor:
        return transpose(self)


def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{op} produced a non-finite value")


def _result(data: np.ndarray, parents: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
    _check_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.op = op
    out._spent = False
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def record(data: np.ndarray, parents: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
    """Register a fused operation on the tape.

    ``backward(g)`` must return one gradient (or ``None``) per parent.
    """
    return _result(np.asarray(data, dtype=np.float64), parents, backward, op)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.array([[g.sum()]])


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape and a.shape != (1, 1) and b.shape != (1, 1):
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ----------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.cols != b.rows:
        raise DimensionError(f"matmul: inner dimensions {a.shape} x {b.shape}")

    def back(g):
        return (g @ b.data.T if a.requires_grad else None,
                a.data.T @ g if b.requires_grad else None)

    return _result(a.data @ b.data, (a, b), back, "matmul")


def transpose(a: Tensor) -> Tensor:
    return _result(a.data.T.copy(), (a,), lambda g: (g.T,), "transpose")


def reshape(a: Tensor, shape: tuple[int, int]) -> Tensor:
    old = a.shape
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"reshape: {exc}") from None
    if data.ndim != 2:
        raise DimensionError("reshape: result must be 2-D")
    return _result(data, (a,), lambda g: (g.reshape(old),), "reshape")


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: {exc}") from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def back(g):
        if axis == 1:
            return tuple(g[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))
        return tuple(g[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _result(data, tensors, back, "concat")


# ----------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes(a, b, "add")
    return _result(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes(a, b, "sub")
    return _result(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes(a, b, "mul")

    def back(g):
        return (_unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
                _unbroadcast(g * a.data, b.shape) if b.requires_grad else None)

    return _result(a.data * b.data, (a, b), back, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes(a, b, "div")
    out = a.data / b.data

    def back(g):
        return (_unbroadcast(g / b.data, a.shape) if a.requires_grad else None,
                _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None)

    return _result(out, (a, b), back, "div")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _result(a.data * c, (a,), lambda g: (g * c,), "scale")


def leaky_relu(a: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    pos = a.data > 0
    return _result(np.where(pos, a.data, slope * a.data), (a,),
                   lambda g: (np.where(pos, g, slope * g),), "leaky_relu")


def elu(a: Tensor) -> Tensor:
    pos = a.data > 0
    ex = np.exp(np.minimum(a.data, 0.0))
    return _result(np.where(pos, a.data, ex - 1.0), (a,),
                   lambda g: (np.where(pos, g, g * ex),), "elu")


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):  # overflow is reported by the finite check
        out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    """Natural log of ``max(a, EPS)``; clamped entries get zero gradient."""
    clamped = np.maximum(a.data, EPS)
    live = a.data > EPS
    return _result(np.log(clamped), (a,), lambda g: (np.where(live, g / clamped, 0.0),), "log")


def square(a: Tensor) -> Tensor:
    return _result(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,), "square")


def power(a: Tensor, p: float) -> Tensor:
    """``a ** p`` for strictly positive ``a`` (degree normalisation)."""
    if (a.data <= 0).any():
        raise ValueError("power: base must be strictly positive")
    out = a.data ** p
    return _result(out, (a,), lambda g: (g * p * out / a.data,), "power")


def scale_rows(a: Tensor, v: Tensor) -> Tensor:
    """Multiply row ``i`` of ``a`` by ``v[i, 0]``."""
    if v.shape != (a.rows, 1):
        raise DimensionError(f"scale_rows: need a ({a.rows}, 1) column, got {v.shape}")

    def back(g):
        return (g * v.data if a.requires_grad else None,
                (g * a.data).sum(axis=1, keepdims=True) if v.requires_grad else None)

    return _result(a.data * v.data, (a, v), back, "scale_rows")


def const_mask(a: Tensor, mask: np.ndarray) -> Tensor:
    """Zero entries where ``mask`` is false; gradient passes only where kept."""
    m = np.asarray(mask, dtype=np.float64)
    if m.shape != a.shape:
        raise DimensionError(f"const_mask: mask {m.shape} vs tensor {a.shape}")
    return _result(a.data * m, (a,), lambda g: (g * m,), "const_mask")


# ----------------------------------------------------------------------------
# reductions


def sum(a: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    return _result(np.array([[a.data.sum()]]), (a,),
                   lambda g: (np.full(a.shape, g[0, 0]),), "sum")


def mean(a: Tensor) -> Tensor:
    size = a.data.size
    return _result(np.array([[a.data.mean()]]), (a,),
                   lambda g: (np.full(a.shape, g[0, 0] / size),), "mean")


def row_sum(a: Tensor) -> Tensor:
    return _result(a.data.sum(axis=1, keepdims=True), (a,),
                   lambda g: (np.broadcast_to(g, a.shape).copy(),), "row_sum")


def frobenius_norm_sq(a: Tensor) -> Tensor:
    return _result(np.array([[np.sum(a.data * a.data)]]), (a,),
                   lambda g: (2.0 * g[0, 0] * a.data,), "frobenius_norm_sq")


def trace(a: Tensor) -> Tensor:
    if a.rows != a.cols:
        raise DimensionError(f"trace: matrix must be square, got {a.shape}")
    return _result(np.array([[np.trace(a.data)]]), (a,),
                   lambda g: (g[0, 0] * np.eye(a.rows),), "trace")


def row_l2_normalize(a: Tensor) -> Tensor:
    """Scale each row to unit L2 norm; rows with norm below EPS pass through."""
    norms = np.sqrt(np.sum(a.data * a.data, axis=1, keepdims=True))
    live = norms >= EPS
    safe = np.where(live, norms, 1.0)
    out = a.data / safe

    def back(g):
        proj = np.sum(g * out, axis=1, keepdims=True)
        return (np.where(live, (g - out * proj) / safe, g),)

    return _result(out, (a,), back, "row_l2_normalize")


def masked_softmax(logits: Tensor, mask: np.ndarray, axis: int = 1) -> Tensor:
    """Softmax along ``axis`` over entries where ``mask`` holds; masked entries are 0.

    Every slice must keep at least one entry, otherwise
    :class:`DegenerateNeighborhoodError` is raised.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != logits.shape:
        raise DimensionError(f"masked_softmax: mask {mask.shape} vs logits {logits.shape}")
    live = mask.any(axis=axis, keepdims=True)
    if not live.all():
        raise DegenerateNeighborhoodError("masked_softmax: a slice is fully masked")
    z = np.where(mask, logits.data, -np.inf)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _result(out, (logits,), back, "masked_softmax")


# ----------------------------------------------------------------------------
# sparse / indexed primitives


class SparsePattern:
    """Fixed ``(row, col)`` positions of an ``n x m`` sparse matrix.

    Positions are stored in row-major order and are unique.  Values for a
    pattern are ``nnz x 1`` tensors aligned with ``rows``/``cols``.
    """

    def __init__(self, rows, cols, shape: tuple[int, int]):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        if rows.shape != cols.shape:
            raise DimensionError("pattern rows/cols lengths differ")
        n, m = int(shape[0]), int(shape[1])
        if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= m):
            raise DimensionError(f"pattern index outside {n}x{m}")
        key = rows * m + cols
        if key.size > 1 and (key[1:] <= key[:-1]).any():
            order = np.argsort(key, kind="stable")
            key = key[order]
            if (np.diff(key) == 0).any():
                raise ValueError("pattern has duplicate positions")
            rows, cols = rows[order], cols[order]
        else:
            order = np.arange(key.size)
        self.rows = rows
        self.cols = cols
        self.keys = key  # flat row-major index, strictly increasing
        self.shape = (n, m)
        self.order = order  # caller-position -> sorted-position map
        self._indptr = np.concatenate([[0], np.cumsum(np.bincount(self.rows, minlength=n))])
        self._tperm = None
        self._tindptr = None
        self._index_map = None

    @property
    def nnz(self) -> int:
        return self.rows.size

    @property
    def dense_friendly(self) -> bool:
        """True when a dense BLAS product is cheaper than a sparse one."""
        cells = self.shape[0] * self.shape[1]
        return cells <= _DENSE_PAIR_CELLS and self.nnz * 4 > cells

    def operator(self, values: np.ndarray, transpose: bool = False):
        """Matrix (dense or csr) carrying ``values``, optionally transposed."""
        if self.dense_friendly:
            a = self.to_dense(values)
            return a.T if transpose else a
        return self.csr_t(values) if transpose else self.csr(values)

    def csr(self, values: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((values.ravel(), self.cols, self._indptr), shape=self.shape)

    def csr_t(self, values: np.ndarray) -> sp.csr_matrix:
        if self._tperm is None:
            self._tperm = np.lexsort((self.rows, self.cols))
            self._tindptr = np.concatenate(
                [[0], np.cumsum(np.bincount(self.cols, minlength=self.shape[1]))])
        v = values.ravel()[self._tperm]
        return sp.csr_matrix((v, self.rows[self._tperm], self._tindptr),
                             shape=(self.shape[1], self.shape[0]))

    def to_dense(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros(self.shape[0] * self.shape[1])
        out[self.keys] = values.ravel()
        return out.reshape(self.shape)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.shape[0] * self.shape[1], dtype=bool)
        out[self.keys] = True
        return out.reshape(self.shape)

    def positions(self, rows, cols) -> np.ndarray:
        """Index into this pattern for each ``(row, col)``; -1 where absent."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        key = rows * self.shape[1] + cols
        if self.dense_friendly:
            if self._index_map is None:
                self._index_map = np.full(self.shape[0] * self.shape[1], -1, dtype=np.int64)
                self._index_map[self.keys] = np.arange(self.nnz)
            return self._index_map[key]
        mine = self.keys
        if mine.size == 0:
            return np.full(key.shape, -1, dtype=np.int64)
        idx = np.minimum(np.searchsorted(mine, key), mine.size - 1)
        return np.where(mine[idx] == key, idx, -1)


def spmm(values: Tensor, pattern: SparsePattern, x: Tensor, transpose: bool = False) -> Tensor:
    """``A @ x`` (or ``A.T @ x``) where ``A`` has ``values`` on ``pattern``."""
    n, m = pattern.shape
    if values.shape != (pattern.nnz, 1):
        raise DimensionError(f"spmm: values {values.shape} vs nnz {pattern.nnz}")
    inner = n if transpose else m
    if x.rows != inner:
        raise DimensionError(f"spmm: operand has {x.rows} rows, expected {inner}")
    v = values.data
    out = np.asarray(pattern.operator(v, transpose) @ x.data)

    def back(g):
        gx = None
        if x.requires_grad:
            gx = np.asarray(pattern.operator(v, not transpose) @ g)
        gv = None
        if values.requires_grad:
            if transpose:
                gv = _pair_dot(x.data, g, pattern.rows, pattern.cols)
            else:
                gv = _pair_dot(g, x.data, pattern.rows, pattern.cols)
        return gv, gx

    return _result(out, (values, x), back, "spmm")


def _pair_dot(x: np.ndarray, y: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    cells = x.shape[0] * y.shape[0]
    if rows.size * 32 > cells and cells <= _DENSE_PAIR_CELLS:
        # gathered copies are memory bound; past this density one BLAS product wins
        return (x @ y.T)[rows, cols].reshape(-1, 1)
    out = np.empty((rows.size, 1))
    d = max(x.shape[1], 1)
    step = max(_CHUNK_ELEMS // d, 1)
    for lo in range(0, rows.size, step):
        hi = lo + step
        out[lo:hi, 0] = np.einsum("ij,ij->i", x[rows[lo:hi]], y[cols[lo:hi]])
    return out


def pair_dot(x: Tensor, y: Tensor, rows, cols) -> Tensor:
    """``out[e] = <x[rows[e]], y[cols[e]]>`` as an ``nnz x 1`` tensor."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if x.cols != y.cols:
        raise DimensionError(f"pair_dot: widths {x.cols} and {y.cols}")

    def back(g):
        gx = gy = None
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx, rows, g * y.data[cols])
        if y.requires_grad:
            gy = np.zeros_like(y.data)
            np.add.at(gy, cols, g * x.data[rows])
        return gx, gy

    return _result(_pair_dot(x.data, y.data, rows, cols), (x, y), back, "pair_dot")


def gather_rows(a: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    n = a.rows

    def back(g):
        if g.shape[1] == 1:
            return (np.bincount(idx, weights=g[:, 0], minlength=n).reshape(n, 1),)
        out = np.zeros(a.shape)
        np.add.at(out, idx, g)
        return (out,)

    return _result(a.data[idx], (a,), back, "gather_rows")


def take(a: Tensor, rows, cols, unique: bool = False) -> Tensor:
    """Entries ``a[rows[e], cols[e]]`` as an ``nnz x 1`` tensor.

    ``unique`` promises no position repeats, which allows a plain scatter.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)

    def back(g):
        out = np.zeros(a.shape)
        if unique:
            out[rows, cols] = g[:, 0]
        else:
            np.add.at(out, (rows, cols), g[:, 0])
        return (out,)

    return _result(a.data[rows, cols].reshape(-1, 1), (a,), back, "take")


def segment_sum(a: Tensor, seg, nseg: int) -> Tensor:
    """Sum rows of ``a`` sharing a segment id into an ``nseg x cols`` tensor."""
    seg = np.asarray(seg, dtype=np.int64)
    if seg.size != a.rows:
        raise DimensionError("segment_sum: one segment id per row required")
    if a.cols == 1:
        out = np.bincount(seg, weights=a.data[:, 0], minlength=nseg).reshape(nseg, 1)
    else:
        out = np.zeros((nseg, a.cols))
        np.add.at(out, seg, a.data)
    return _result(out, (a,), lambda g: (g[seg],), "segment_sum")


def _segment_max(x: np.ndarray, seg: np.ndarray, nseg: int) -> np.ndarray:
    mx = np.full(nseg, -np.inf)
    if seg.size == 0:
        return mx
    if seg.size > 1 and (seg[1:] < seg[:-1]).any():
        np.maximum.at(mx, seg, x)
        return mx
    starts = np.flatnonzero(np.r_[True, seg[1:] != seg[:-1]])
    mx[seg[starts]] = np.maximum.reduceat(x, starts)
    return mx


def segment_max(a: Tensor, seg, nseg: int) -> Tensor:
    """Per-segment maximum of a column; gradient goes to the first arg-max entry.

    Empty segments yield 0.
    """
    seg = np.asarray(seg, dtype=np.int64)
    x = a.data[:, 0]
    mx = _segment_max(x, seg, nseg)
    hit = np.flatnonzero(x == mx[seg])
    first = np.full(nseg, -1, dtype=np.int64)
    first[seg[hit[::-1]]] = hit[::-1]
    empty = first < 0
    out = np.where(empty, 0.0, mx).reshape(nseg, 1)

    def back(g):
        ga = np.zeros(a.shape)
        ok = ~empty
        ga[first[ok], 0] = g[ok, 0]
        return (ga,)

    return _result(out, (a,), back, "segment_max")


def segment_softmax(a: Tensor, seg, nseg: int) -> Tensor:
    """Softmax of an ``nnz x 1`` column within each segment."""
    seg = np.asarray(seg, dtype=np.int64)
    x = a.data[:, 0]
    mx = _segment_max(x, seg, nseg)
    e = np.exp(x - mx[seg])
    tot = np.bincount(seg, weights=e, minlength=nseg)
    out = (e / tot[seg]).reshape(-1, 1)

    def back(g):
        dot = np.bincount(seg, weights=(g * out)[:, 0], minlength=nseg)
        return (out * (g - dot[seg].reshape(-1, 1)),)

    return _result(out, (a,), back, "segment_softmax")


def parameters_grad_norm(params: Iterable[Tensor]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return float(np.sqrt(total))
