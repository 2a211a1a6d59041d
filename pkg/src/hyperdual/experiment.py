"""Turn a resolved configuration into datasets, models and training runs."""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np

from . import config as C
from .data import Dataset, load_idx_images, load_table, make_splits, mnist_subset, synth_blobs
from .errors import ConfigError
from .hypergraph import Incidence, knn_hypergraph
from .model import HyperdualNet
from .tensor import Tensor
from .train import RunResult, train

log = logging.getLogger(__name__)

ABLATION_MODES = ("full", "no-hgl", "no-density")

# independent streams derived from one run seed
_SPLIT_STREAM, _INIT_STREAM = 0, 1


def load_dataset(cfg: dict) -> Dataset:
    kind = cfg["dataset"]
    if kind == "blobs":
        return synth_blobs(cfg["blobs_classes"], cfg["blobs_per_class"], cfg["blobs_dim"],
                           cfg["blobs_spread"], cfg["blobs_seed"])
    if kind == "mnist":
        ds = load_idx_images(cfg["mnist_images"], cfg["mnist_labels"])
        if cfg["mnist_per_class"]:
            ds = mnist_subset(ds, cfg["mnist_per_class"], cfg["mnist_subset_seed"])
        return ds
    if kind == "table":
        return load_table(cfg["features_csv"], cfg["labels_csv"])
    raise ConfigError(f"unknown dataset {kind!r}", "dataset")


def run_rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Split and initialisation generators for one run."""
    return (np.random.default_rng([seed, _SPLIT_STREAM]),
            np.random.default_rng([seed, _INIT_STREAM]))


class Experiment:
    """A loaded dataset and its k-NN hypergraph, shared by every run."""

    def __init__(self, cfg: dict, dataset: Dataset | None = None):
        self.cfg = cfg
        self.dataset = dataset if dataset is not None else load_dataset(cfg)
        if cfg["k"] >= self.dataset.n:
            raise ConfigError(f"k={cfg['k']} needs more than {self.dataset.n} nodes", "k")
        self.h0: Incidence = knn_hypergraph(self.dataset.features, cfg["k"])
        self.features = Tensor(self.dataset.features)

    def split(self, seed: int):
        split_rng, _ = run_rngs(seed)
        try:
            return make_splits(self.dataset, self.cfg["labels"], self.cfg["val"],
                               int(split_rng.integers(2**32)), self.cfg["stratified"])
        except ValueError as exc:
            raise ConfigError(str(exc), "labels") from None

    def run(self, seed: int, mode: str = "full") -> RunResult:
        cfg = self.cfg
        model_cfg = C.model_config(cfg)
        if mode == "no-hgl":
            model_cfg = replace(model_cfg, use_hgl=False)
        elif mode == "no-density":
            model_cfg = replace(model_cfg, use_density=False)
        elif mode != "full":
            raise ConfigError(f"unknown ablation mode {mode!r}", "mode")
        _, init_rng = run_rngs(seed)
        model = HyperdualNet(self.dataset.dim, self.dataset.n_classes, model_cfg, init_rng)
        result = train(model, self.features, self.h0, self.dataset.labels, self.split(seed),
                       C.train_config(cfg, seed))
        log.info("%s seed %d: test acc %.4f after %d epochs", mode, seed,
                 result.test_accuracy, result.epochs)
        return result
