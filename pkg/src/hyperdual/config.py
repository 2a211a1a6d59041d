"""Flat ``key = value`` experiment configuration.

Precedence, lowest first: built-in defaults, ``--preset``, ``--config``
file, command-line flags.  Every key is typed; unknown keys are rejected.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources

from .errors import ConfigError
from .model import ModelConfig
from .structure import CANDIDATE_K, DENSE_LIMIT, SIMILARITIES, HglParams, ViewConfig
from .train import TrainConfig

DATASETS = ("blobs", "mnist", "table")


@dataclass(frozen=True)
class Key:
    kind: type
    default: object
    help: str
    choices: tuple = ()


SCHEMA: dict[str, Key] = {
    # data
    "dataset": Key(str, "blobs", "data source", DATASETS),
    "mnist_images": Key(str, "", "IDX image file (mnist)"),
    "mnist_labels": Key(str, "", "IDX label file (mnist)"),
    "mnist_per_class": Key(int, 1000, "samples drawn per class; 0 keeps every image"),
    "mnist_subset_seed": Key(int, 20230618, "seed of the per-class subset"),
    "features_csv": Key(str, "", "feature table (table)"),
    "labels_csv": Key(str, "", "label table (table)"),
    "blobs_classes": Key(int, 3, "blob classes"),
    "blobs_per_class": Key(int, 100, "points per blob"),
    "blobs_dim": Key(int, 10, "blob dimensionality"),
    "blobs_spread": Key(float, 0.25, "blob standard deviation"),
    "blobs_seed": Key(int, 0, "blob generator seed"),
    # split
    "labels": Key(int, 15, "labelled training nodes"),
    "val": Key(int, 30, "validation nodes"),
    "stratified": Key(bool, True, "spread split counts evenly over classes"),
    # hypergraph and structure learning
    "k": Key(int, 15, "neighbours per k-NN hyperedge"),
    "views": Key(int, 2, "learned views; kernels alternate cosine, inner_product"),
    "first_view": Key(str, "cosine", "kernel of the first view", SIMILARITIES),
    "embedding_dim": Key(int, 70, "per-view embedding width"),
    "delta1": Key(float, 0.6, "similarity threshold"),
    "eta": Key(float, 0.5, "weight of the learned hypergraph in the blend"),
    "alpha": Key(float, 1.0, "smoothness weight"),
    "beta": Key(float, 1.0, "Frobenius weight"),
    "gamma": Key(float, 1.0, "connectivity weight"),
    "mu": Key(float, 1.0, "view-consistency weight"),
    "dense_limit": Key(int, DENSE_LIMIT, "largest n using full pairwise similarity"),
    "candidate_k": Key(int, CANDIDATE_K, "candidate neighbours per node above dense_limit"),
    "use_hgl": Key(bool, True, "learn the hypergraph (false pins it to k-NN)"),
    # attention
    "delta2": Key(float, 0.5, "density similarity threshold"),
    "use_density": Key(bool, True, "add density bias to attention logits"),
    "heads": Key(int, 2, "attention heads in the first layer"),
    "hidden": Key(int, 64, "width of each first-layer head"),
    # training
    "lambda": Key(float, 1.0, "cross-entropy weight"),
    "lr": Key(float, 0.01, "initial learning rate"),
    "lr_halving_period": Key(int, 100, "epochs between learning-rate halvings"),
    "max_epochs": Key(int, 2000, "epoch cap"),
    "patience": Key(int, 100, "early-stopping patience"),
    "seed": Key(int, 0, "seed of the first run"),
    "repeats": Key(int, 10, "runs with consecutive seeds"),
}

PRESETS = ("mnist", "cifar10", "scene15", "synthetic")


def defaults() -> dict:
    return {k: v.default for k, v in SCHEMA.items()}


def parse_value(key: str, text: str):
    if key not in SCHEMA:
        raise ConfigError(f"unknown key {key!r}", key)
    entry = SCHEMA[key]
    text = text.strip()
    try:
        if entry.kind is bool:
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            value = low in ("true", "1", "yes")
        else:
            value = entry.kind(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {entry.kind.__name__}", key) from None
    if entry.choices and value not in entry.choices:
        raise ConfigError(f"{key}: {value!r} is not one of {', '.join(entry.choices)}", key)
    return value


def parse_text(text: str, origin: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'", key or None)
        if key in out:
            raise ConfigError(f"{origin}:{lineno}: {key!r} set twice", key)
        try:
            out[key] = parse_value(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{origin}:{lineno}: {exc}", exc.key) from None
    return out


def load_file(path) -> dict:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}", "config")
    with open(path) as fh:
        return parse_text(fh.read(), str(path))


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}", "preset")
    text = (resources.files("hyperdual") / "presets" / f"{name}.cfg").read_text()
    return parse_text(text, f"preset {name}")


def resolve(preset: str | None = None, path=None, overrides: dict | None = None) -> dict:
    cfg = defaults()
    if preset:
        cfg.update(load_preset(preset))
    if path:
        cfg.update(load_file(path))
    for key, value in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", key)
        cfg[key] = value
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    positive = ("k", "views", "embedding_dim", "heads", "hidden", "labels", "val",
                "blobs_classes", "blobs_per_class", "blobs_dim", "candidate_k")
    for key in positive:
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be >= 1", key)
    if cfg["mnist_per_class"] < 0:
        raise ConfigError("mnist_per_class must be >= 0", "mnist_per_class")
    if cfg["blobs_spread"] < 0:
        raise ConfigError("blobs_spread must be >= 0", "blobs_spread")
    if cfg["dataset"] == "mnist" and not (cfg["mnist_images"] and cfg["mnist_labels"]):
        raise ConfigError("dataset mnist needs mnist_images and mnist_labels", "mnist_images")
    if cfg["dataset"] == "table" and not (cfg["features_csv"] and cfg["labels_csv"]):
        raise ConfigError("dataset table needs features_csv and labels_csv", "features_csv")
    # the typed constructors below carry the remaining range checks
    model_config(cfg)
    train_config(cfg)


def render(cfg: dict) -> str:
    """Text form that :func:`parse_text` reads back to the same dict."""
    lines = []
    for key in SCHEMA:
        value = cfg[key]
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def write_resolved(cfg: dict, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(render(cfg))
    os.replace(tmp, path)


def view_kinds(cfg: dict) -> tuple[str, ...]:
    first = SIMILARITIES.index(cfg["first_view"])
    return tuple(SIMILARITIES[(first + v) % len(SIMILARITIES)] for v in range(cfg["views"]))


def _checked(build):
    try:
        return build()
    except ConfigError:
        raise
    except ValueError as exc:
        # constructor messages lead with the offending field name
        word = str(exc).split()[0]
        raise ConfigError(str(exc), word if word in SCHEMA else None) from None


def hgl_params(cfg: dict) -> HglParams:
    views = tuple(ViewConfig(kind, cfg["embedding_dim"]) for kind in view_kinds(cfg))
    return _checked(lambda: HglParams(
        delta1=cfg["delta1"], eta=cfg["eta"], alpha=cfg["alpha"], beta=cfg["beta"],
        gamma=cfg["gamma"], mu=cfg["mu"], views=views))


def model_config(cfg: dict) -> ModelConfig:
    if not 0 <= cfg["delta2"] < 1:
        raise ConfigError("delta2 must lie in [0, 1)", "delta2")
    return ModelConfig(hgl=hgl_params(cfg), delta2=cfg["delta2"], heads=cfg["heads"],
                       hidden=cfg["hidden"], use_hgl=cfg["use_hgl"], use_density=cfg["use_density"],
                       dense_limit=cfg["dense_limit"], candidate_k=cfg["candidate_k"])


def train_config(cfg: dict, seed: int | None = None) -> TrainConfig:
    return TrainConfig(lam=cfg["lambda"], learning_rate=cfg["lr"],
                       lr_halving_period=cfg["lr_halving_period"], max_epochs=cfg["max_epochs"],
                       patience=cfg["patience"], seed=cfg["seed"] if seed is None else seed,
                       repeats=cfg["repeats"])
