"""The dual network: structure learner feeding a two-layer attention network."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .attention import DhatHead, DensityProfile, density_profile, head_forward
from .hypergraph import Incidence, propagate_to_hyperedges, propagate_to_nodes
from .structure import CANDIDATE_K, DENSE_LIMIT, HglParams, HypergraphLearner, hgl_loss
from .tensor import Tensor


@dataclass(frozen=True)
class ModelConfig:
    hgl: HglParams = field(default_factory=HglParams)
    delta2: float = 0.5
    heads: int = 2
    hidden: int = 64
    use_hgl: bool = True
    use_density: bool = True
    dense_limit: int = DENSE_LIMIT
    candidate_k: int = CANDIDATE_K


@dataclass
class ForwardResult:
    logits: Tensor
    hgl: Tensor
    hgl_parts: dict[str, Tensor]
    incidence: Incidence


class HyperdualNet:
    """Joint hypergraph learner and density-aware attention classifier.

    Layer one has ``heads`` heads of width ``hidden`` whose outputs are
    concatenated; layer two is a single head of width ``n_classes``.
    """

    def __init__(self, in_dim: int, n_classes: int, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.learner = None
        if config.use_hgl:
            self.learner = HypergraphLearner(in_dim, config.hgl, rng,
                                             config.dense_limit, config.candidate_k)
        self.layers = [
            [DhatHead(in_dim, config.hidden, rng) for _ in range(config.heads)],
            [DhatHead(config.heads * config.hidden, n_classes, rng)],
        ]

    def parameters(self) -> list[Tensor]:
        params = self.learner.parameters() if self.learner is not None else []
        for heads in self.layers:
            for hd in heads:
                params.extend(hd.parameters())
        return params

    def state(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.parameters()]

    def load_state(self, state: list[np.ndarray]) -> None:
        for p, v in zip(self.parameters(), state):
            p.data = v.copy()

    def _density(self, x0: Tensor, hd: Incidence) -> DensityProfile | None:
        """Densities from the input features propagated over the detached hypergraph."""
        if not self.config.use_density:
            return None
        feats = propagate_to_nodes(hd, propagate_to_hyperedges(hd, Tensor(x0.data))).data
        return density_profile(feats, hd, self.config.delta2)

    def forward(self, x0: Tensor, h0: Incidence, frozen: dict | None = None) -> ForwardResult:
        """Full forward pass.

        ``frozen`` (a dict, normally ``None``) pins the per-pass discrete
        choices: threshold kept sets and density biases.  The first call with
        a given dict records them and later calls reuse them, which makes the
        loss a smooth function of the parameters for finite-difference checks.
        """
        if self.learner is not None:
            out = self.learner.forward(x0, h0, frozen)
            h = out.blended
            hgl, parts = hgl_loss(out, self.config.hgl)
        else:
            h = h0
            hgl, parts = Tensor(0.0), {}

        density = self._density(x0, h.detached())
        x = x0
        for depth, heads in enumerate(self.layers):
            outs = []
            for t, head in enumerate(heads):
                xw_in = T.matmul(x, head.W)
                ew = propagate_to_hyperedges(h, xw_in)
                # first layer: propagate once before attending; W commutes with propagation
                xw = propagate_to_nodes(h, ew) if depth == 0 else xw_in
                outs.append(head_forward(head, xw, ew, h, density, frozen, key=(depth, t)))
            x = outs[0] if len(outs) == 1 else T.concat(outs, axis=1)
        return ForwardResult(x, hgl, parts, h)
