"""Multi-view hypergraph structure learning.

Each view embeds the raw features with its own learnable matrix, scores node
pairs with a similarity kernel, keeps pairs above a threshold and reads
column ``k`` of the kept similarities as hyperedge ``k``.  Views are averaged,
then blended with the original (k-NN) hypergraph.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .hypergraph import (
    Incidence,
    IncidenceError,
    candidate_pattern,
    connectivity_penalty,
    knn_indices,
    laplacian_quadratic,
    prune,
    transfer,
    union_pattern,
)
from .tensor import SparsePattern, Tensor

log = logging.getLogger(__name__)

SIMILARITIES = ("cosine", "inner_product")
DENSE_LIMIT = 2000
CANDIDATE_K = 50


@dataclass(frozen=True)
class ViewConfig:
    similarity: str = "cosine"
    embedding_dim: int = 70

    def __post_init__(self):
        if self.similarity not in SIMILARITIES:
            raise ValueError(f"unknown similarity {self.similarity!r}; use one of {SIMILARITIES}")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")


@dataclass(frozen=True)
class HglParams:
    delta1: float = 0.6
    eta: float = 0.5
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    mu: float = 1.0
    views: tuple[ViewConfig, ...] = (ViewConfig("cosine"), ViewConfig("inner_product"))

    def __post_init__(self):
        if not 0.0 <= self.delta1 < 1.0:
            raise ValueError("delta1 must lie in [0, 1)")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        for name in ("alpha", "beta", "gamma", "mu"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.views:
            raise ValueError("at least one view is required")


@dataclass
class SparseValues:
    """Values on a sparse pattern, e.g. a thresholded similarity matrix."""

    pattern: SparsePattern
    values: Tensor

    def to_dense(self) -> np.ndarray:
        return self.pattern.to_dense(self.values.data)


@dataclass
class HglOutput:
    blended: Incidence
    per_view: list[Tensor]
    mean: Tensor
    union: SparsePattern
    embeddings: list[Tensor] = field(default_factory=list)


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def embed(x0: Tensor, proj: Tensor) -> Tensor:
    """Row-normalised low-dimensional embedding ``X0 @ P``."""
    xt = T.matmul(x0, proj)
    norms = np.linalg.norm(xt.data, axis=1)
    if (norms < T.EPS).any():
        log.warning("embed: %d zero rows left unnormalised", int((norms < T.EPS).sum()))
    return T.row_l2_normalize(xt)


def _segment_minmax(values: Tensor, seg: np.ndarray, nseg: int) -> Tensor:
    hi = T.segment_max(values, seg, nseg)
    lo = T.scale(T.segment_max(T.scale(values, -1.0), seg, nseg), -1.0)
    span = T.sub(hi, lo)
    live = (span.data >= T.EPS)
    # segments with a constant value map to 0; their span is replaced by 1
    safe_span = T.add(T.const_mask(span, live), Tensor((~live).astype(float)))
    shifted = T.const_mask(T.sub(values, T.gather_rows(lo, seg)), live[seg])
    return T.mul(shifted, T.gather_rows(T.power(safe_span, -1.0), seg))


def similarity(xt: Tensor, kind: str, candidates: SparsePattern | None = None):
    """Pairwise similarity in ``[0, 1]`` of the embedded rows.

    Without ``candidates`` a dense ``n x n`` tensor is returned.  With a
    candidate pattern, a :class:`SparseValues` over that pattern is returned.
    Cosine scores are mapped through ``(s + 1) / 2``; inner products are
    min-max normalised per row.  Self-similarity is forced to 1.
    """
    if kind not in SIMILARITIES:
        raise ValueError(f"unknown similarity {kind!r}")
    n = xt.rows
    if candidates is None:
        raw = T.matmul(xt, T.transpose(xt))
        rows = np.repeat(np.arange(n), n)
        flat = T.reshape(raw, (n * n, 1))
        if kind == "cosine":
            vals = T.scale(T.add(flat, 1.0), 0.5)
        else:
            vals = _segment_minmax(flat, rows, n)
        diag = np.zeros(n * n, dtype=bool)
        diag[:: n + 1] = True
        vals = T.add(T.const_mask(vals, ~diag[:, None]), Tensor(diag.astype(float)[:, None]))
        return T.reshape(vals, (n, n))

    raw = T.pair_dot(xt, xt, candidates.rows, candidates.cols)
    if kind == "cosine":
        vals = T.scale(T.add(raw, 1.0), 0.5)
    else:
        vals = _segment_minmax(raw, candidates.rows, n)
    diag = candidates.rows == candidates.cols
    vals = T.add(T.const_mask(vals, ~diag[:, None]), Tensor(diag.astype(float)[:, None]))
    return SparseValues(candidates, vals)


def kept_similarity(xt: Tensor, kind: str, delta1: float,
                    kept: SparsePattern | None = None) -> SparseValues:
    """Fused dense ``sparsify(similarity(xt, kind), delta1)``.

    Same values and gradients as the composed version, without keeping the
    ``n x n`` intermediates on the tape.
    """
    if kind not in SIMILARITIES:
        raise ValueError(f"unknown similarity {kind!r}")
    x = xt.data
    n = x.shape[0]
    raw = x @ x.T
    if kind == "cosine":
        v = (raw + 1.0) * 0.5
    else:
        lo_at, hi_at = raw.argmin(axis=1), raw.argmax(axis=1)
        lo = raw[np.arange(n), lo_at][:, None]
        span = raw[np.arange(n), hi_at][:, None] - lo
        live = span >= T.EPS
        inv = np.where(live, 1.0 / np.where(live, span, 1.0), 0.0)
        v = (raw - lo) * inv
    del raw
    np.fill_diagonal(v, 1.0)
    if kept is None:
        r, c = np.nonzero(v >= delta1)
        kept = SparsePattern(r, c, (n, n))
    flat = kept.keys
    vals = v.ravel()[flat].reshape(-1, 1)
    if kind == "cosine":
        v = None  # not needed by the backward pass

    def back(g):
        gs = np.zeros(n * n)
        gs[flat] = g[:, 0]
        gs = gs.reshape(n, n)
        np.fill_diagonal(gs, 0.0)
        if kind == "cosine":
            gs *= 0.5
        else:
            # v itself has the forced unit diagonal, but gs is zero there
            g_lo = ((gs * (v - 1.0)).sum(axis=1, keepdims=True) * inv)[:, 0]
            g_hi = (-(gs * v).sum(axis=1, keepdims=True) * inv)[:, 0]
            gs *= inv
            rows = np.arange(n)
            np.add.at(gs, (rows, lo_at), g_lo)
            np.add.at(gs, (rows, hi_at), g_hi)
        return ((gs + gs.T) @ x,)

    return SparseValues(kept, T.record(vals, (xt,), back, f"kept_similarity[{kind}]"))


def sparsify(s, delta1: float, kept: SparsePattern | None = None) -> SparseValues:
    """Keep entries ``>= delta1``; dropped entries vanish from the pattern.

    Passing ``kept`` reuses a previously chosen kept set (gradient checks).
    """
    if isinstance(s, Tensor):
        if kept is None:
            r, c = np.nonzero(s.data >= delta1)
            kept = SparsePattern(r, c, s.shape)
        return SparseValues(kept, T.take(s, kept.rows, kept.cols, unique=True))
    if kept is None:
        keep = np.flatnonzero(s.values.data[:, 0] >= delta1)
        kept = SparsePattern(s.pattern.rows[keep], s.pattern.cols[keep], s.pattern.shape)
    return SparseValues(kept, transfer(s.values, s.pattern, kept))


def view_hypergraph(s_tilde: SparseValues) -> SparseValues:
    """Column ``k`` of the kept similarities becomes hyperedge ``k``; self-weight 1."""
    n = s_tilde.pattern.shape[0]
    diag = SparsePattern(np.arange(n), np.arange(n), (n, n))
    pat = union_pattern(s_tilde.pattern, diag)
    vals = transfer(s_tilde.values, s_tilde.pattern, pat)
    on_diag = (pat.rows == pat.cols)[:, None]
    vals = T.add(T.const_mask(vals, ~on_diag), Tensor(on_diag.astype(float)))
    return SparseValues(pat, vals)


def merge_views(views: list[SparseValues]) -> tuple[SparsePattern, list[Tensor], Tensor]:
    """Entrywise mean over views, on the union of their patterns."""
    if not views:
        raise ValueError("merge_views needs at least one view")
    shape = views[0].pattern.shape
    for v in views:
        if v.pattern.shape != shape:
            raise IncidenceError(f"view shapes {shape} and {v.pattern.shape} differ")
    union = union_pattern(*(v.pattern for v in views))
    aligned = [transfer(v.values, v.pattern, union) for v in views]
    total = aligned[0]
    for a in aligned[1:]:
        total = T.add(total, a)
    return union, aligned, T.scale(total, 1.0 / len(views))


def consistency_loss(per_view: list[Tensor], mean_h: Tensor) -> Tensor:
    """``(1/V) * sum_v ||H_v - H||^2`` over aligned views."""
    total = None
    for v in per_view:
        term = T.frobenius_norm_sq(T.sub(v, mean_h))
        total = term if total is None else T.add(total, term)
    return T.scale(total, 1.0 / len(per_view))


def blend(mean_h: SparseValues, h0: Incidence, eta: float) -> Incidence:
    """``eta * H + (1 - eta) * H0`` as a finalized incidence."""
    if mean_h.pattern.shape != h0.pattern.shape:
        raise IncidenceError(f"blend shapes {mean_h.pattern.shape} and {h0.pattern.shape} differ")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    pat = union_pattern(mean_h.pattern, h0.pattern)
    learned = transfer(mean_h.values, mean_h.pattern, pat)
    base = transfer(h0.weights, h0.pattern, pat)
    vals = T.add(T.scale(learned, eta), T.scale(base, 1.0 - eta))
    pat, vals = prune(pat, vals)
    return Incidence(pat, vals)


def hgl_loss(output: HglOutput, params: HglParams) -> tuple[Tensor, dict[str, Tensor]]:
    """Four-term structure loss; returns the total and its unweighted parts."""
    h = output.blended
    n = h.n
    smooth = None
    for xt in output.embeddings:
        q = laplacian_quadratic(h, xt)
        smooth = q if smooth is None else T.add(smooth, q)
    if smooth is None:
        smooth = Tensor(0.0)
    else:
        smooth = T.scale(smooth, 1.0 / len(output.embeddings))
    frob = T.frobenius_norm_sq(h.weights)
    conn = connectivity_penalty(h)
    con = consistency_loss(output.per_view, output.mean)
    total = T.add(
        T.add(T.scale(smooth, params.alpha / n**2), T.scale(frob, params.beta / n**2)),
        T.add(T.scale(conn, params.gamma), T.scale(con, params.mu / n**2)),
    )
    if not np.isfinite(total.data).all():
        raise T.NonFiniteError("structure loss is not finite")
    return total, {"smooth": smooth, "frobenius": frob, "connectivity": conn, "consistency": con}


class HypergraphLearner:
    """Learnable per-view embeddings producing the blended hypergraph."""

    def __init__(self, in_dim: int, params: HglParams, rng: np.random.Generator,
                 dense_limit: int = DENSE_LIMIT, candidate_k: int = CANDIDATE_K):
        self.params = params
        self.dense_limit = dense_limit
        self.candidate_k = candidate_k
        self.projections = [
            Tensor(xavier(rng, in_dim, v.embedding_dim), requires_grad=True) for v in params.views
        ]
        self._candidates: SparsePattern | None = None

    def parameters(self) -> list[Tensor]:
        return list(self.projections)

    def candidates(self, x0: Tensor) -> SparsePattern | None:
        n = x0.rows
        if n <= self.dense_limit:
            return None
        if self._candidates is None or self._candidates.shape[0] != n:
            k = min(self.candidate_k, n - 1)
            self._candidates = candidate_pattern(knn_indices(x0.data, k))
        return self._candidates

    def forward(self, x0: Tensor, h0: Incidence, frozen: dict | None = None) -> HglOutput:
        cand = self.candidates(x0)
        views, embeddings = [], []
        for v, (cfg, proj) in enumerate(zip(self.params.views, self.projections)):
            xt = embed(x0, proj)
            key = ("kept", v)
            kept = frozen.get(key) if frozen is not None else None
            if cand is None:
                st = kept_similarity(xt, cfg.similarity, self.params.delta1, kept)
            else:
                st = sparsify(similarity(xt, cfg.similarity, cand), self.params.delta1, kept)
            if frozen is not None:
                frozen.setdefault(key, st.pattern)
            views.append(view_hypergraph(st))
            embeddings.append(xt)
        union, aligned, mean_h = merge_views(views)
        blended = blend(SparseValues(union, mean_h), h0, self.params.eta)
        return HglOutput(blended, aligned, mean_h, union, embeddings)
