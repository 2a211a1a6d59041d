"""Dataset loading, splitting and synthetic fixtures."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# fixed so the 1,000-per-class MNIST subset is regenerable bit-for-bit
MNIST_SUBSET_SEED = 20230618


class DataFormatError(ValueError):
    pass


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    name: str = "dataset"

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or 0 in self.features.shape:
            raise DataFormatError(f"{self.name}: features must be a non-empty 2-D array")
        if self.labels.shape != (self.features.shape[0],):
            raise DataFormatError(f"{self.name}: one label per row required")
        if not np.isfinite(self.features).all():
            raise DataFormatError(f"{self.name}: non-finite feature value")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise DataFormatError(f"{self.name}: labels must lie in [0, {self.n_classes})")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx, name: str | None = None) -> Dataset:
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.n_classes, name or self.name)


@dataclass
class Split:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray


# ----------------------------------------------------------------------------
# IDX


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _idx_header(raw: bytes, path, magic: int, ndims: int) -> tuple[int, ...]:
    need = 4 * (1 + ndims)
    if len(raw) >= 4:
        found = struct.unpack(">I", raw[:4])[0]
        if found != magic:
            raise DataFormatError(f"{path}: bad magic 0x{found:08x} at byte offset 0, "
                                  f"expected 0x{magic:08x}")
    if len(raw) < need:
        raise DataFormatError(f"{path}: header truncated at byte offset {len(raw)} (need {need} bytes)")
    return struct.unpack(f">{ndims}I", raw[4:need])


def parse_idx_images(raw: bytes, path="<bytes>") -> np.ndarray:
    count, rows, cols = _idx_header(raw, path, IMAGE_MAGIC, 3)
    expected = 16 + count * rows * cols
    if len(raw) != expected:
        raise DataFormatError(f"{path}: payload ends at byte offset {len(raw)}, expected {expected}")
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows * cols).astype(np.float64) / 255.0


def parse_idx_labels(raw: bytes, path="<bytes>") -> np.ndarray:
    (count,) = _idx_header(raw, path, LABEL_MAGIC, 1)
    expected = 8 + count
    if len(raw) != expected:
        raise DataFormatError(f"{path}: payload ends at byte offset {len(raw)}, expected {expected}")
    return np.frombuffer(raw, dtype=np.uint8, offset=8).astype(np.int64)


def load_idx_images(image_path, label_path, name: str = "mnist") -> Dataset:
    """Images scaled to ``[0, 1]`` and flattened row-major; gzip is detected."""
    x = parse_idx_images(_read_bytes(image_path), image_path)
    y = parse_idx_labels(_read_bytes(label_path), label_path)
    if x.shape[0] != y.shape[0]:
        raise DataFormatError(f"{label_path}: {y.shape[0]} labels for {x.shape[0]} images "
                              f"(count field at byte offset 4)")
    return Dataset(x, y, max(10, int(y.max()) + 1), name)


def write_idx(images: np.ndarray, labels: np.ndarray, image_path, label_path) -> None:
    """Write uint8 images ``(count, rows, cols)`` and labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    with open(image_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, count, rows, cols))
        fh.write(images.tobytes())
    with open(label_path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, labels.size))
        fh.write(labels.tobytes())


def export_bundled_mnist(out_dir) -> tuple[str, str]:
    """Write the 5,000 MNIST digits bundled with ``mlxtend`` as IDX files.

    Returns the image and label paths.  Requires the optional ``mlxtend``
    package, which ships 500 digits per class of the MNIST training set.
    """
    from importlib import resources

    src = resources.files("mlxtend.data") / "data" / "mnist_5k.csv.gz"
    with resources.as_file(src) as path:
        table = np.loadtxt(path, delimiter=",", dtype=np.int64)
    labels, pixels = table[:, -1], table[:, :-1]
    os.makedirs(out_dir, exist_ok=True)
    img = os.path.join(out_dir, "mnist5k-images-idx3-ubyte")
    lab = os.path.join(out_dir, "mnist5k-labels-idx1-ubyte")
    write_idx(pixels.reshape(-1, 28, 28), labels, img, lab)
    return img, lab


def mnist_subset(dataset: Dataset, per_class: int = 1000, seed: int = MNIST_SUBSET_SEED) -> Dataset:
    """Uniformly pick ``per_class`` samples of each class, ordered by original index."""
    rng = np.random.default_rng(seed)
    picks = []
    for c in range(dataset.n_classes):
        pool = np.flatnonzero(dataset.labels == c)
        if pool.size < per_class:
            raise DataFormatError(f"class {c} has {pool.size} samples, {per_class} requested")
        picks.append(rng.choice(pool, size=per_class, replace=False))
    return dataset.subset(np.sort(np.concatenate(picks)), f"{dataset.name}-{per_class}pc")


# ----------------------------------------------------------------------------
# CSV tables


def load_table(features_csv, labels_csv, name: str = "table") -> Dataset:
    rows = []
    with open(features_csv) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                raise DataFormatError(f"{features_csv}:{lineno}: non-numeric field") from None
            if len(rows[-1]) != len(rows[0]):
                raise DataFormatError(f"{features_csv}:{lineno}: expected {len(rows[0])} fields, "
                                      f"got {len(rows[-1])}")
    if not rows:
        raise DataFormatError(f"{features_csv}: empty file")
    labels = []
    with open(labels_csv) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                labels.append(int(line.strip()))
            except ValueError:
                raise DataFormatError(f"{labels_csv}:{lineno}: not an integer label") from None
            if labels[-1] < 0:
                raise DataFormatError(f"{labels_csv}:{lineno}: negative label")
    if len(labels) != len(rows):
        raise DataFormatError(f"{labels_csv}: {len(labels)} labels for {len(rows)} feature rows")
    y = np.array(labels, dtype=np.int64)
    return Dataset(np.array(rows), y, int(y.max()) + 1, name)


def save_table(dataset: Dataset, features_csv, labels_csv) -> None:
    with open(features_csv, "w") as fh:
        for row in dataset.features:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    with open(labels_csv, "w") as fh:
        fh.write("".join(f"{int(v)}\n" for v in dataset.labels))


# ----------------------------------------------------------------------------
# splits


def make_splits(dataset: Dataset, train_count: int, val_count: int, seed: int,
                stratified: bool = True) -> Split:
    """Disjoint random train/val selection; the remainder is the test set.

    With ``stratified`` the counts are spread evenly across classes (any
    remainder goes to the lowest class indices).
    """
    n = dataset.n
    if train_count < 0 or val_count < 0 or train_count + val_count > n:
        raise ValueError(f"cannot take {train_count} train + {val_count} val from {n} samples")
    rng = np.random.default_rng(seed)
    if not stratified:
        perm = rng.permutation(n)
        train, val = perm[:train_count], perm[train_count:train_count + val_count]
    else:
        c = dataset.n_classes
        pools = [rng.permutation(np.flatnonzero(dataset.labels == k)) for k in range(c)]
        train_per = _per_class(train_count, c)
        val_per = _per_class(val_count, c)
        train, val = [], []
        for k, pool in enumerate(pools):
            need = train_per[k] + val_per[k]
            if need > pool.size:
                raise ValueError(f"class {k} has {pool.size} samples, {need} requested")
            train.append(pool[:train_per[k]])
            val.append(pool[train_per[k]:need])
        train, val = np.concatenate(train), np.concatenate(val)
    train, val = np.sort(train), np.sort(val)
    mask = np.ones(n, dtype=bool)
    mask[train] = False
    mask[val] = False
    return Split(train.astype(np.int64), val.astype(np.int64), np.flatnonzero(mask))


def _per_class(count: int, classes: int) -> np.ndarray:
    per = np.full(classes, count // classes)
    per[: count % classes] += 1
    return per


def write_split(split: Split, path) -> None:
    with open(path, "w") as fh:
        for name in ("train", "val", "test"):
            idx = getattr(split, f"{name}_idx")
            fh.write(f"{name}: " + " ".join(str(int(i)) for i in idx) + "\n")


def read_split(path) -> Split:
    parts = {}
    with open(path) as fh:
        for line in fh:
            head, _, rest = line.partition(":")
            parts[head.strip()] = np.array([int(v) for v in rest.split()], dtype=np.int64)
    missing = {"train", "val", "test"} - parts.keys()
    if missing:
        raise DataFormatError(f"{path}: missing {sorted(missing)}")
    return Split(parts["train"], parts["val"], parts["test"])


# ----------------------------------------------------------------------------
# synthetic


def synth_blobs(classes: int, per_class: int, dim: int, spread: float, seed: int) -> Dataset:
    """Gaussian blobs around the first ``classes`` unit basis vectors."""
    if dim < classes:
        raise ValueError("dim must be at least the number of classes")
    rng = np.random.default_rng(seed)
    means = np.eye(classes, dim)
    labels = np.repeat(np.arange(classes), per_class)
    x = means[labels] + spread * rng.standard_normal((labels.size, dim))
    return Dataset(x, labels, classes, f"blobs{classes}x{per_class}")


def nearest_centroid_accuracy(dataset: Dataset) -> float:
    """Accuracy of assigning each point to the closest class mean (fixture check)."""
    cents = np.stack([dataset.features[dataset.labels == c].mean(0) for c in range(dataset.n_classes)])
    d = ((dataset.features[:, None, :] - cents[None]) ** 2).sum(-1)
    return float(np.mean(d.argmin(1) == dataset.labels))
