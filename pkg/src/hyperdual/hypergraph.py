"""Weighted hypergraph incidence structures and message propagation.

Hyperedges are node-centred: hyperedge ``k`` is built around node ``k``, so
``m == n`` for every incidence this package constructs and incidences from
different sources can be blended entrywise.  Each hyperedge contains its own
centre node with weight 1 (or at least ``1 - eta`` after blending), which
keeps every vertex and hyperedge degree strictly positive.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import SparsePattern, Tensor


class IncidenceError(ValueError):
    pass


class Incidence:
    """Finalized weighted incidence ``H`` in ``[0, 1]^{n x m}``.

    ``weights`` is an ``nnz x 1`` tensor aligned with ``pattern`` and may carry
    gradients (learned hypergraphs).  Zero weights are never stored.
    """

    def __init__(self, pattern: SparsePattern, weights: Tensor):
        if weights.shape != (pattern.nnz, 1):
            raise IncidenceError(f"weights {weights.shape} do not match nnz={pattern.nnz}")
        w = weights.data
        if (w <= 0).any() or (w > 1).any():
            raise IncidenceError("incidence weights must lie in (0, 1]")
        n, m = pattern.shape
        if np.bincount(pattern.rows, minlength=n).min(initial=1) == 0:
            raise IncidenceError("a node belongs to no hyperedge")
        if np.bincount(pattern.cols, minlength=m).min(initial=1) == 0:
            raise IncidenceError("a hyperedge has no member")
        self.pattern = pattern
        self.weights = weights

    @classmethod
    def from_entries(cls, rows, cols, weights, shape) -> Incidence:
        """Build from parallel arrays; zero weights are dropped."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64).ravel()
        keep = weights != 0
        pat = SparsePattern(rows[keep], cols[keep], shape)
        return cls(pat, Tensor(weights[keep][pat.order].reshape(-1, 1)))

    @classmethod
    def from_dense(cls, h) -> Incidence:
        h = np.asarray(h, dtype=np.float64)
        r, c = np.nonzero(h)
        return cls.from_entries(r, c, h[r, c], h.shape)

    @property
    def n(self) -> int:
        return self.pattern.shape[0]

    @property
    def m(self) -> int:
        return self.pattern.shape[1]

    @property
    def nnz(self) -> int:
        return self.pattern.nnz

    @property
    def rows(self) -> np.ndarray:
        return self.pattern.rows

    @property
    def cols(self) -> np.ndarray:
        return self.pattern.cols

    def values(self) -> np.ndarray:
        return self.weights.data[:, 0]

    def to_dense(self) -> np.ndarray:
        return self.pattern.to_dense(self.weights.data)

    def members(self, k: int) -> np.ndarray:
        return self.rows[self.cols == k]

    def detached(self) -> Incidence:
        return Incidence(self.pattern, self.weights.detach())

    def __repr__(self) -> str:
        return f"Incidence(n={self.n}, m={self.m}, nnz={self.nnz})"


@dataclass(frozen=True)
class Degrees:
    vertex_degrees: np.ndarray
    hyperedge_degrees: np.ndarray


def degrees(h: Incidence) -> Degrees:
    w = h.values()
    return Degrees(np.bincount(h.rows, weights=w, minlength=h.n),
                   np.bincount(h.cols, weights=w, minlength=h.m))


def _degree_tensors(h: Incidence) -> tuple[Tensor, Tensor]:
    dv = T.segment_sum(h.weights, h.rows, h.n)
    de = T.segment_sum(h.weights, h.cols, h.m)
    return dv, de


# ----------------------------------------------------------------------------
# k-NN construction


def _sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :] - 2.0 * x @ y.T
    return np.maximum(d, 0.0)


def knn_indices(features, k: int, chunk: int = 1024) -> np.ndarray:
    """Indices of the ``k`` nearest other nodes of each node (Euclidean).

    Ties are broken by ascending node index.  A cheap expanded-form distance
    shortlists candidates; the final order uses exact ``sum((a - b)**2)``.
    """
    x = np.asarray(features.data if isinstance(features, Tensor) else features, dtype=np.float64)
    n = x.shape[0]
    if not 0 < k < n:
        raise ValueError(f"k must satisfy 0 < k < n (k={k}, n={n})")
    short = min(n - 1, 2 * k + 8)
    out = np.empty((n, k), dtype=np.int64)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d = _sq_dists(x[lo:hi], x)
        d[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        if short < n - 1:
            cand = np.argpartition(d, short, axis=1)[:, :short + 1]
        else:
            cand = np.tile(np.arange(n), (hi - lo, 1))
        for r in range(hi - lo):
            i = lo + r
            c = cand[r][cand[r] != i]
            diff = x[c] - x[i]
            exact = np.einsum("ij,ij->i", diff, diff)
            order = np.lexsort((c, exact))
            out[i] = c[order[:k]]
    return out


def knn_hypergraph(features, k: int) -> Incidence:
    """One hyperedge per node: the node itself plus its ``k`` nearest neighbours."""
    nbrs = knn_indices(features, k)
    n = nbrs.shape[0]
    centres = np.arange(n)
    rows = np.concatenate([centres, nbrs.ravel()])
    cols = np.concatenate([centres, np.repeat(centres, k)])
    return Incidence.from_entries(rows, cols, np.ones(rows.size), (n, n))


def candidate_pattern(neighbors: np.ndarray) -> SparsePattern:
    """Positions ``(i, k)`` with ``i`` among node ``k``'s neighbours or ``i == k``."""
    n, kk = neighbors.shape
    centres = np.arange(n)
    rows = np.concatenate([centres, neighbors.ravel()])
    cols = np.concatenate([centres, np.repeat(centres, kk)])
    return SparsePattern(rows, cols, (n, n))


# ----------------------------------------------------------------------------
# pattern algebra used when merging hypergraphs


def union_pattern(*patterns: SparsePattern) -> SparsePattern:
    shape = patterns[0].shape
    for p in patterns[1:]:
        if p.shape != shape:
            raise IncidenceError(f"pattern shapes {shape} and {p.shape} differ")
    m = shape[1]
    if shape[0] * m <= T._DENSE_PAIR_CELLS:
        hit = np.zeros(shape[0] * m, dtype=bool)
        for p in patterns:
            hit[p.keys] = True
        keys = np.flatnonzero(hit)
    else:
        keys = np.unique(np.concatenate([p.keys for p in patterns]))
    return SparsePattern(keys // m, keys % m, shape)


def transfer(values: Tensor, src: SparsePattern, dst: SparsePattern) -> Tensor:
    """Re-index ``values`` from ``src`` onto ``dst``; positions absent from ``src`` become 0."""
    pos = src.positions(dst.rows, dst.cols)
    if (pos < 0).all():
        return Tensor(np.zeros((dst.nnz, 1)))
    padded = T.concat([values, Tensor(np.zeros((1, 1)))], axis=0)
    return T.gather_rows(padded, np.where(pos < 0, src.nnz, pos))


def prune(pattern: SparsePattern, values: Tensor) -> tuple[SparsePattern, Tensor]:
    """Drop positions whose value is exactly zero."""
    keep = np.flatnonzero(values.data[:, 0] != 0)
    if keep.size == pattern.nnz:
        return pattern, values
    sub = SparsePattern(pattern.rows[keep], pattern.cols[keep], pattern.shape)
    return sub, T.gather_rows(values, keep)


# ----------------------------------------------------------------------------
# propagation


def propagate_to_hyperedges(h: Incidence, x0: Tensor) -> Tensor:
    """``E = De^-1/2 H^T Dv^-1/2 X0``."""
    if x0.rows != h.n:
        raise T.DimensionError(f"features have {x0.rows} rows, incidence has {h.n} nodes")
    dv, de = _degree_tensors(h)
    y = T.spmm(h.weights, h.pattern, T.scale_rows(x0, T.power(dv, -0.5)), transpose=True)
    return T.scale_rows(y, T.power(de, -0.5))


def propagate_to_nodes(h: Incidence, e: Tensor) -> Tensor:
    """``X = Dv^-1/2 H De^-1/2 E``."""
    if e.rows != h.m:
        raise T.DimensionError(f"hyperedge features have {e.rows} rows, incidence has {h.m} edges")
    dv, de = _degree_tensors(h)
    y = T.spmm(h.weights, h.pattern, T.scale_rows(e, T.power(de, -0.5)))
    return T.scale_rows(y, T.power(dv, -0.5))


def laplacian_quadratic(h: Incidence, x: Tensor) -> Tensor:
    """``tr(X^T Hhat X)`` with ``Hhat = Dv^-1/2 H De^-1 H^T Dv^-1/2``, never formed densely."""
    if x.rows != h.n:
        raise T.DimensionError(f"x has {x.rows} rows, incidence has {h.n} nodes")
    dv, de = _degree_tensors(h)
    y = T.spmm(h.weights, h.pattern, T.scale_rows(x, T.power(dv, -0.5)), transpose=True)
    return T.sum(T.scale_rows(T.square(y), T.power(de, -1.0)))


def normalized_row_sums(h: Incidence) -> Tensor:
    """``Hhat @ 1`` as an ``n x 1`` tensor."""
    dv, de = _degree_tensors(h)
    inv_sqrt_dv = T.power(dv, -0.5)
    y = T.spmm(h.weights, h.pattern, inv_sqrt_dv, transpose=True)
    z = T.spmm(h.weights, h.pattern, T.mul(y, T.power(de, -1.0)))
    return T.mul(z, inv_sqrt_dv)


def connectivity_penalty(h: Incidence) -> Tensor:
    """``-(1/n) * sum_i log(max((Hhat 1)_i, eps))``."""
    return T.scale(T.sum(T.log(normalized_row_sums(h))), -1.0 / h.n)


# ----------------------------------------------------------------------------
# text serialization


def write_incidence(h: Incidence, path) -> None:
    lines = [f"{h.n} {h.m} {h.nnz}"]
    lines += [f"{i}\t{k}\t{w!r}" for i, k, w in zip(h.rows.tolist(), h.cols.tolist(), h.values().tolist())]
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_incidence(path) -> Incidence:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise IncidenceError(f"{path}: header must be 'n m nnz'")
        n, m, nnz = (int(v) for v in header)
        rows, cols, w = [], [], []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise IncidenceError(f"{path}:{lineno}: expected 3 tab-separated fields")
            rows.append(int(parts[0]))
            cols.append(int(parts[1]))
            w.append(float(parts[2]))
    if len(rows) != nnz:
        raise IncidenceError(f"{path}: header says {nnz} entries, found {len(rows)}")
    return Incidence.from_entries(rows, cols, w, (n, m))
