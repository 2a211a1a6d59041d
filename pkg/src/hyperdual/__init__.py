"""Joint hypergraph structure learning and density-aware hypergraph attention.

The package carries its own small reverse-mode differentiation engine
(:mod:`hyperdual.tensor`); everything else builds on it.
"""

from .data import Dataset, Split, load_idx_images, load_table, make_splits, synth_blobs
from .errors import ConfigError
from .hypergraph import Incidence, knn_hypergraph
from .model import HyperdualNet, ModelConfig
from .structure import HglParams, ViewConfig
from .tensor import Tensor
from .train import RunResult, TrainConfig, evaluate, repeat_runs, train

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "Dataset", "HyperdualNet", "HglParams", "Incidence", "ModelConfig", "RunResult",
    "Split", "Tensor", "TrainConfig", "ViewConfig", "evaluate", "knn_hypergraph",
    "load_idx_images", "load_table", "make_splits", "repeat_runs", "synth_blobs", "train",
]
