"""Optional PNG figures rendered next to the CSV outputs.

Only imported when ``--plot`` is given; the CSV files remain the contract.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .train import mean_std  # noqa: E402


def _save(fig, path) -> None:
    tmp = f"{path}.tmp.png"
    fig.savefig(tmp, dpi=120, bbox_inches="tight")
    plt.close(fig)
    os.replace(tmp, path)


def plot_training(results, path) -> None:
    """Validation loss and accuracy per epoch, one line per run."""
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 3.8))
    for r in results:
        epochs = [h.epoch for h in r.history]
        ax_loss.plot(epochs, [h.val_loss for h in r.history], lw=0.9, label=f"seed {r.seed}")
        ax_acc.plot(epochs, [100 * h.val_acc for h in r.history], lw=0.9)
    ax_loss.set(xlabel="epoch", ylabel="validation cross-entropy", yscale="log")
    ax_acc.set(xlabel="epoch", ylabel="validation accuracy (%)")
    if len(results) <= 10:
        ax_loss.legend(fontsize=7)
    _save(fig, path)


def plot_ablation(acc_by_mode: dict[str, list[float]], path) -> None:
    modes = list(acc_by_mode)
    stats = [mean_std(acc_by_mode[m]) for m in modes]
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.bar(modes, [s[0] for s in stats], yerr=[s[1] for s in stats], capsize=4,
           color=["#4c72b0", "#dd8452", "#55a868"][: len(modes)])
    lo = min(s[0] - s[1] for s in stats)
    ax.set_ylim(max(0.0, lo - 5), 100)
    ax.set_ylabel("test accuracy (%)")
    _save(fig, path)


def plot_sweep(param: str, curve, path) -> None:
    """``curve`` holds ``(value, mean, std)`` triples."""
    xs, mu, sd = zip(*curve)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(xs, mu, yerr=sd, marker="o", capsize=3)
    ax.set(xlabel=param, ylabel="test accuracy (%)")
    _save(fig, path)
