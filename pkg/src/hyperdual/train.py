"""Joint training loop, Adam, evaluation and repeat-run summaries."""

from __future__ import annotations

import csv
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .attention import classify, cross_entropy
from .errors import ConfigError
from .hypergraph import Incidence
from .model import HyperdualNet
from .tensor import Tensor

log = logging.getLogger(__name__)

METRIC_FIELDS = ("epoch", "lr", "loss_total", "loss_hgl", "loss_ce", "loss_con", "val_loss", "val_acc")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1.0
    learning_rate: float = 0.01
    lr_halving_period: int = 100
    max_epochs: int = 2000
    patience: int = 100
    seed: int = 0
    repeats: int = 10

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0", "lambda")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive", "lr")
        if self.lr_halving_period < 1:
            raise ConfigError("lr_halving_period must be >= 1", "lr_halving_period")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1", "max_epochs")
        if not 1 <= self.patience <= self.max_epochs:
            raise ConfigError("patience must lie in [1, max_epochs]", "patience")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1", "repeats")


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    loss_total: float
    loss_hgl: float
    loss_ce: float
    loss_con: float
    val_loss: float
    val_acc: float


@dataclass
class RunResult:
    seed: int
    history: list[EpochRecord]
    test_accuracy: float
    best_epoch: int
    seconds: float
    decomposition: dict[str, float] = field(default_factory=dict)

    @property
    def epochs(self) -> int:
        return len(self.history)


# ----------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: list[Tensor]) -> AdamState:
        return cls([np.zeros(p.shape) for p in params], [np.zeros(p.shape) for p in params])


def adam_step(params: list[Tensor], grads: list[np.ndarray | None], state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Bias-corrected Adam update, in place.  ``None`` gradients count as zero."""
    if len(params) != len(state.m):
        raise ValueError("parameter list does not match optimizer state")
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if m.shape != p.shape:
            raise T.DimensionError(f"optimizer state {m.shape} vs parameter {p.shape}")
        if g is None:
            g = np.zeros(p.shape)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data = p.data - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def learning_rate(lr0: float, epoch: int, period: int = 100) -> float:
    return lr0 * 0.5 ** (epoch // period)


# ----------------------------------------------------------------------------
# evaluation


def evaluate(z, labels, index_set) -> float:
    """Fraction of ``index_set`` whose arg-max class (lowest index on ties) matches."""
    z = np.asarray(z.data if isinstance(z, Tensor) else z)
    idx = np.asarray(index_set, dtype=np.int64)
    if idx.size == 0:
        return float("nan")
    pred = np.argmax(z[idx], axis=1)
    return float(np.mean(pred == np.asarray(labels)[idx]))


def _known_labels(labels: np.ndarray, split) -> np.ndarray:
    known = np.full(labels.shape, -1, dtype=np.int64)
    for idx in (split.train_idx, split.val_idx):
        known[idx] = labels[idx]
    return known


def _check_split(split, n: int) -> None:
    parts = [np.asarray(split.train_idx), np.asarray(split.val_idx), np.asarray(split.test_idx)]
    joined = np.concatenate(parts)
    if joined.size != np.unique(joined).size:
        raise ConfigError("train/val/test index sets overlap", "split")
    if joined.size and (joined.min() < 0 or joined.max() >= n):
        raise ConfigError("split index outside the dataset", "split")
    if parts[0].size == 0:
        raise ConfigError("the training set is empty", "labels")
    if parts[1].size == 0:
        raise ConfigError("the validation set is empty", "val")


# ----------------------------------------------------------------------------
# training


def train(model: HyperdualNet, features: Tensor, h0: Incidence, labels, split,
          config: TrainConfig) -> RunResult:
    """Full-batch joint training with early stopping on validation loss.

    Only train and validation labels are visible to the loop; test accuracy
    is measured once, after the best-validation parameters are restored.
    """
    labels = np.asarray(labels, dtype=np.int64)
    _check_split(split, features.rows)
    known = _known_labels(labels, split)
    params = model.parameters()
    state = AdamState.zeros_like(params)
    history: list[EpochRecord] = []
    best_val, best_epoch, best_state = np.inf, -1, model.state()
    best_parts: dict[str, float] = {}
    start = time.perf_counter()

    for epoch in range(config.max_epochs):
        lr = learning_rate(config.learning_rate, epoch, config.lr_halving_period)
        try:
            fw = model.forward(features, h0)
            z = classify(fw.logits)
            ce = cross_entropy(z, known, split.train_idx)
            total = T.add(fw.hgl, T.scale(ce, config.lam))
            val_loss = cross_entropy(z, known, split.val_idx).item()
            for p in params:
                p.zero_grad()
            total.backward()
        except T.NonFiniteError as exc:
            raise TrainingError(f"epoch {epoch}: {exc} (lr={lr:g})") from exc

        con = fw.hgl_parts.get("consistency")
        rec = EpochRecord(epoch, lr, total.item(), fw.hgl.item(), ce.item(),
                          con.item() if con is not None else 0.0,
                          val_loss, evaluate(z, known, split.val_idx))
        history.append(rec)
        if val_loss < best_val:
            best_val, best_epoch, best_state = val_loss, epoch, model.state()
            best_parts = {"total": rec.loss_total, "hgl": rec.loss_hgl,
                          "ce_weighted": config.lam * rec.loss_ce}
        elif epoch - best_epoch >= config.patience:
            log.debug("early stop at epoch %d (best %d)", epoch, best_epoch)
            break
        adam_step(params, [p.grad for p in params], state, lr)

    model.load_state(best_state)
    z = classify(model.forward(features, h0).logits)
    acc = evaluate(z, labels, split.test_idx)
    return RunResult(config.seed, history, acc, best_epoch, time.perf_counter() - start, best_parts)


# ----------------------------------------------------------------------------
# summaries and CSV


def mean_std(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std())


def format_mean_std(values, decimals: int = 2) -> str:
    m, s = mean_std(values)
    return f"{m:.{decimals}f}±{s:.{decimals}f}"


def repeat_runs(run_one, config: TrainConfig, repeats: int | None = None) -> tuple[list[RunResult], str]:
    """Run ``run_one(seed)`` for seeds ``seed .. seed + repeats - 1``.

    Returns the results and the test accuracy summary as ``mean±std``.
    """
    repeats = config.repeats if repeats is None else repeats
    results = [run_one(config.seed + r) for r in range(repeats)]
    return results, format_mean_std([r.test_accuracy for r in results])


def write_rows(path, header, rows) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    os.replace(tmp, path)


def write_metrics(history: list[EpochRecord], path) -> None:
    write_rows(path, METRIC_FIELDS,
               ([getattr(r, f) if f == "epoch" else repr(float(getattr(r, f))) for f in METRIC_FIELDS]
                for r in history))


def read_metrics(path) -> list[EpochRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [EpochRecord(int(r["epoch"]), *(float(r[f]) for f in METRIC_FIELDS[1:])) for r in rows]


def write_summary(results: list[RunResult], path) -> None:
    """One row per run (accuracy in percent) plus a ``mean±std`` footer."""
    rows = [[i, r.seed, f"{100 * r.test_accuracy:.4f}", r.epochs, r.best_epoch]
            for i, r in enumerate(results)]
    rows.append(["mean±std", "", format_mean_std([100 * r.test_accuracy for r in results]), "", ""])
    write_rows(path, ("run", "seed", "test_acc", "epochs", "best_epoch"), rows)
