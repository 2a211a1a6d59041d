"""Density-aware hypergraph attention.

A head scores every (node, hyperedge) membership with a GAT-style logit,
adds a normalised density bias, and normalises within the neighbourhood:
over the members of a hyperedge for vertex aggregation, over the incident
hyperedges of a node for hyperedge aggregation.  Attention neighbourhoods are
the nonzero positions of the incidence; incidence weights themselves do not
enter the attention.

Densities are plain numpy arrays.  They are recomputed every forward pass
from detached features and never receive gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import tensor as T
from .errors import ConfigError
from .hypergraph import Incidence
from .structure import xavier
from .tensor import Tensor

# above this node count the co-membership similarities are computed pairwise
_DENSE_DENSITY_LIMIT = 4000


@dataclass
class DensityProfile:
    node: np.ndarray
    hyperedge: np.ndarray


class DhatHead:
    """Parameters of one attention head: ``W``, ``alpha_X`` and ``alpha_E``."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.W = Tensor(xavier(rng, in_dim, out_dim), requires_grad=True)
        self.alpha_x = Tensor(xavier(rng, 2 * out_dim, 1), requires_grad=True)
        self.alpha_e = Tensor(xavier(rng, 2 * out_dim, 1), requires_grad=True)

    @property
    def out_dim(self) -> int:
        return self.W.cols

    def parameters(self) -> list[Tensor]:
        return [self.W, self.alpha_x, self.alpha_e]


# ----------------------------------------------------------------------------
# densities


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(norms < T.EPS, 1.0, norms)


def co_members(h: Incidence) -> tuple[np.ndarray, np.ndarray]:
    """Off-diagonal node pairs ``(i, k)`` sharing at least one hyperedge."""
    if h.n <= _DENSE_DENSITY_LIMIT and h.nnz * 16 > h.n * h.m:
        b = np.zeros((h.n, h.m), dtype=np.float32)
        b[h.rows, h.cols] = 1.0
        shared = (b @ b.T) > 0
        np.fill_diagonal(shared, False)
        return np.nonzero(shared)
    b = sp.csr_matrix((np.ones(h.nnz), (h.rows, h.cols)), shape=(h.n, h.m))
    a = (b @ b.T).tocoo()
    off = a.row != a.col
    return a.row[off].astype(np.int64), a.col[off].astype(np.int64)


def node_density(features, h: Incidence, delta2: float) -> np.ndarray:
    """Sum of similarities above ``delta2`` to the nodes co-member with each node.

    Similarity is cosine mapped to ``[0, 1]`` by ``(s + 1) / 2``.
    """
    x = np.asarray(features.data if isinstance(features, Tensor) else features, dtype=np.float64)
    if not 0.0 <= delta2 < 1.0:
        raise ConfigError("delta2 must lie in [0, 1)")
    u = _unit_rows(x)
    i, k = co_members(h)
    s = (T._pair_dot(u, u, i, k)[:, 0] + 1.0) * 0.5
    s = np.where(s > delta2, s, 0.0)
    return np.bincount(i, weights=s, minlength=h.n)


def hyperedge_density(rho_x: np.ndarray, h: Incidence) -> np.ndarray:
    """Sum of member-node densities for each hyperedge."""
    return np.bincount(h.cols, weights=np.asarray(rho_x)[h.rows], minlength=h.m)


def density_profile(features, h: Incidence, delta2: float) -> DensityProfile:
    rho = node_density(features, h, delta2)
    return DensityProfile(rho, hyperedge_density(rho, h))


def normalize_density(rho: np.ndarray, upper: float) -> np.ndarray:
    """Min-max rescale to ``[0, max(upper, 0)]``; constant input maps to zeros."""
    rho = np.asarray(rho, dtype=np.float64)
    lo, hi = rho.min(), rho.max()
    if hi - lo < T.EPS:
        return np.zeros_like(rho)
    return (rho - lo) / (hi - lo) * max(upper, 0.0)


# ----------------------------------------------------------------------------
# attention on projected features


def _split(alpha: Tensor, d: int) -> tuple[Tensor, Tensor]:
    return T.gather_rows(alpha, np.arange(d)), T.gather_rows(alpha, np.arange(d, 2 * d))


def _bias(raw: Tensor, rho: np.ndarray | None, index: np.ndarray, bias: np.ndarray | None):
    if bias is None:
        if rho is None:
            bias = np.zeros(index.size)
        else:
            bias = normalize_density(rho, float(raw.data.max()))[index]
    return bias


def vertex_attention_projected(xw: Tensor, ew: Tensor, alpha_x: Tensor, h: Incidence,
                               rho_x: np.ndarray | None = None,
                               bias: np.ndarray | None = None) -> tuple[Tensor, np.ndarray]:
    """Attention of each member node within its hyperedge.

    Returns ``nnz x 1`` weights on ``h``'s pattern (softmax over each
    hyperedge's members) and the density bias that was added to the logits.
    """
    top, bottom = _split(alpha_x, xw.cols)
    s = T.matmul(xw, top)
    t = T.matmul(ew, bottom)
    raw = T.leaky_relu(T.add(T.gather_rows(s, h.rows), T.gather_rows(t, h.cols)))
    bias = _bias(raw, rho_x, h.rows, bias)
    da = T.segment_softmax(T.add(raw, Tensor(bias.reshape(-1, 1))), h.cols, h.m)
    return da, bias


def hyperedge_attention_projected(e_tilde: Tensor, xw: Tensor, alpha_e: Tensor, h: Incidence,
                                  rho_e: np.ndarray | None = None,
                                  bias: np.ndarray | None = None) -> tuple[Tensor, np.ndarray]:
    """Attention of each incident hyperedge for a node (softmax per node)."""
    top, bottom = _split(alpha_e, xw.cols)
    s = T.matmul(e_tilde, top)
    t = T.matmul(xw, bottom)
    raw = T.leaky_relu(T.add(T.gather_rows(s, h.cols), T.gather_rows(t, h.rows)))
    bias = _bias(raw, rho_e, h.cols, bias)
    da = T.segment_softmax(T.add(raw, Tensor(bias.reshape(-1, 1))), h.rows, h.n)
    return da, bias


def vertex_aggregate(da_x: Tensor, xw: Tensor, h: Incidence) -> Tensor:
    """``E~ = ELU(DA_X^T (X W))`` with unit-norm rows."""
    return T.row_l2_normalize(T.elu(T.spmm(da_x, h.pattern, xw, transpose=True)))


def hyperedge_aggregate(da_e: Tensor, e_tilde: Tensor, h: Incidence) -> Tensor:
    """``X~ = ELU(DA_E^T E~)`` with unit-norm rows."""
    return T.row_l2_normalize(T.elu(T.spmm(da_e, h.pattern, e_tilde)))


def head_forward(head: DhatHead, xw: Tensor, ew: Tensor, h: Incidence,
                 density: DensityProfile | None, frozen: dict | None = None,
                 key=None) -> Tensor:
    """One node -> hyperedge -> node transform on already projected features."""
    bx = frozen.get((key, "x")) if frozen is not None else None
    be = frozen.get((key, "e")) if frozen is not None else None
    da_x, bx = vertex_attention_projected(xw, ew, head.alpha_x, h,
                                          None if density is None else density.node, bx)
    e_tilde = vertex_aggregate(da_x, xw, h)
    da_e, be = hyperedge_attention_projected(e_tilde, xw, head.alpha_e, h,
                                             None if density is None else density.hyperedge, be)
    if frozen is not None:
        frozen.setdefault((key, "x"), bx)
        frozen.setdefault((key, "e"), be)
    return hyperedge_aggregate(da_e, e_tilde, h)


# ----------------------------------------------------------------------------
# unprojected entry points


def vertex_attention(x: Tensor, e: Tensor, head: DhatHead, h: Incidence,
                     rho_x: np.ndarray | None = None) -> Tensor:
    da, _ = vertex_attention_projected(T.matmul(x, head.W), T.matmul(e, head.W), head.alpha_x, h, rho_x)
    return da


def hyperedge_attention(e_tilde: Tensor, x: Tensor, head: DhatHead, h: Incidence,
                        rho_e: np.ndarray | None = None) -> Tensor:
    da, _ = hyperedge_attention_projected(e_tilde, T.matmul(x, head.W), head.alpha_e, h, rho_e)
    return da


def layer_forward(head: DhatHead, x: Tensor, e: Tensor, h: Incidence,
                  density: DensityProfile | None) -> Tensor:
    return head_forward(head, T.matmul(x, head.W), T.matmul(e, head.W), h, density)


def multi_head(heads: list[DhatHead], x: Tensor, e: Tensor, h: Incidence,
               density: DensityProfile | None) -> Tensor:
    """Concatenate per-head outputs in declaration order."""
    return T.concat([layer_forward(hd, x, e, h, density) for hd in heads], axis=1)


# ----------------------------------------------------------------------------
# classification


def classify(x_final: Tensor) -> Tensor:
    """Row softmax."""
    return T.masked_softmax(x_final, np.ones(x_final.shape, dtype=bool), axis=1)


def cross_entropy(z: Tensor, labels, labeled) -> Tensor:
    """``-sum_{i in labeled} ln Z[i, y_i]`` for probabilities ``z``."""
    idx = np.asarray(labeled, dtype=np.int64)
    if idx.size == 0:
        raise ConfigError("cross_entropy: the labeled set is empty")
    y = np.asarray(labels, dtype=np.int64)[idx]
    if (y < 0).any() or (y >= z.cols).any():
        raise ConfigError("cross_entropy: label outside [0, c)")
    return T.scale(T.sum(T.log(T.take(z, idx, y))), -1.0)
