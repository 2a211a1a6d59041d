import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperdual.data import (
    DataFormatError,
    Dataset,
    load_idx_images,
    load_table,
    make_splits,
    mnist_subset,
    nearest_centroid_accuracy,
    parse_idx_images,
    parse_idx_labels,
    read_split,
    save_table,
    synth_blobs,
    write_idx,
    write_split,
)


def idx_pair(tmp_path, images, labels):
    img, lab = tmp_path / "img", tmp_path / "lab"
    write_idx(images, labels, img, lab)
    return img, lab


# ----------------------------------------------------------------------------
# IDX


def test_idx_examples(tmp_path):
    ds = load_idx_images(*idx_pair(tmp_path, np.zeros((1, 28, 28)), [3]))
    assert ds.features.shape == (1, 784) and not ds.features.any()
    img = np.zeros((2, 28, 28), dtype=np.uint8)
    img[1, 0, 5] = 255
    ds = load_idx_images(*idx_pair(tmp_path, img, [0, 9]))
    assert ds.features[1, 5] == 1.0 and ds.n_classes == 10
    assert np.array_equal(ds.labels, [0, 9])


def test_idx_row_major_flattening(tmp_path):
    img = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
    ds = load_idx_images(*idx_pair(tmp_path, img, [1, 2]))
    assert np.allclose(ds.features * 255, img.reshape(2, 12))


def test_idx_gzip(tmp_path):
    img, lab = idx_pair(tmp_path, np.full((2, 2, 2), 51, dtype=np.uint8), [1, 1])
    gz = tmp_path / "img.gz"
    gz.write_bytes(gzip.compress(img.read_bytes()))
    assert np.allclose(load_idx_images(gz, lab).features, 0.2)


def test_idx_errors_name_offsets(tmp_path):
    img, lab = idx_pair(tmp_path, np.zeros((2, 2, 2)), [0, 1])
    with pytest.raises(DataFormatError, match="magic.*offset 0"):
        load_idx_images(lab, img)
    short = tmp_path / "short"
    short.write_bytes(struct.pack(">II", 0x801, 3) + b"\x00\x01")
    with pytest.raises(DataFormatError, match="offset 10"):
        load_idx_images(img, short)
    one = tmp_path / "one"
    one.write_bytes(struct.pack(">II", 0x801, 1) + b"\x00")
    with pytest.raises(DataFormatError, match="1 labels for 2 images"):
        load_idx_images(img, one)


def test_every_truncation_is_rejected():
    rng = np.random.default_rng(0)
    imgs = rng.integers(0, 256, (3, 4, 5), dtype=np.uint8)
    raw_img = struct.pack(">IIII", 0x803, 3, 4, 5) + imgs.tobytes()
    raw_lab = struct.pack(">II", 0x801, 3) + bytes([1, 2, 3])
    assert parse_idx_images(raw_img).shape == (3, 20)
    assert parse_idx_labels(raw_lab).tolist() == [1, 2, 3]
    for cut in range(len(raw_img)):
        with pytest.raises(DataFormatError):
            parse_idx_images(raw_img[:cut])
    for cut in range(len(raw_lab)):
        with pytest.raises(DataFormatError):
            parse_idx_labels(raw_lab[:cut])


def test_mnist_subset_balanced_and_reproducible():
    rng = np.random.default_rng(0)
    ds = Dataset(rng.random((200, 3)), np.repeat(np.arange(10), 20), 10)
    a, b = mnist_subset(ds, 7, seed=11), mnist_subset(ds, 7, seed=11)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(np.bincount(a.labels), np.full(10, 7))
    with pytest.raises(DataFormatError):
        mnist_subset(ds, 21)


# ----------------------------------------------------------------------------
# tables


def test_table_example(tmp_path):
    (tmp_path / "f.csv").write_text("1,2\n3,4\n")
    (tmp_path / "l.csv").write_text("0\n1\n")
    ds = load_table(tmp_path / "f.csv", tmp_path / "l.csv")
    assert (ds.n, ds.dim, ds.n_classes) == (2, 2, 2)
    assert np.array_equal(ds.features, [[1, 2], [3, 4]])


@pytest.mark.parametrize("features,labels,match", [
    ("", "", "empty"),
    ("1,2\n3\n", "0\n1\n", "expected 2 fields"),
    ("1,x\n", "0\n", "non-numeric"),
    ("1,2\n", "-1\n", "negative"),
    ("1,2\n", "0\n1\n", "2 labels for 1"),
    ("1,2\n", "a\n", "integer"),
])
def test_table_errors(tmp_path, features, labels, match):
    (tmp_path / "f.csv").write_text(features)
    (tmp_path / "l.csv").write_text(labels)
    with pytest.raises(DataFormatError, match=match):
        load_table(tmp_path / "f.csv", tmp_path / "l.csv")


@pytest.mark.parametrize("seed", range(5))
def test_table_round_trip(tmp_path, seed):
    rng = np.random.default_rng(seed)
    ds = Dataset(rng.standard_normal((15, 4)) * 10.0 ** rng.integers(-8, 8, (15, 4)),
                 rng.integers(0, 3, 15), 3)
    ds.labels[0] = 2
    save_table(ds, tmp_path / "f.csv", tmp_path / "l.csv")
    back = load_table(tmp_path / "f.csv", tmp_path / "l.csv")
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)


# ----------------------------------------------------------------------------
# splits


def ten_two_classes():
    return Dataset(np.arange(20.0).reshape(10, 2), np.repeat([0, 1], 5), 2)


def test_split_examples():
    ds = ten_two_classes()
    s = make_splits(ds, 2, 2, 0, stratified=False)
    assert (s.train_idx.size, s.val_idx.size, s.test_idx.size) == (2, 2, 6)
    s = make_splits(ds, 4, 0, 0)
    assert np.array_equal(np.bincount(ds.labels[s.train_idx]), [2, 2])
    a, b = make_splits(ds, 3, 3, 42), make_splits(ds, 3, 3, 42)
    assert all(np.array_equal(getattr(a, f), getattr(b, f)) for f in ("train_idx", "val_idx", "test_idx"))


def test_split_errors():
    ds = ten_two_classes()
    with pytest.raises(ValueError):
        make_splits(ds, 8, 3, 0)
    with pytest.raises(ValueError):
        make_splits(ds, 6, 6, 0, stratified=True)


def test_split_file_round_trip(tmp_path):
    s = make_splits(ten_two_classes(), 3, 2, 1)
    write_split(s, tmp_path / "split.txt")
    assert (tmp_path / "split.txt").read_text().splitlines()[0].startswith("train: ")
    back = read_split(tmp_path / "split.txt")
    assert all(np.array_equal(getattr(s, f), getattr(back, f)) for f in ("train_idx", "val_idx", "test_idx"))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(2, 30), st.data())
def test_split_properties(classes, per_class, data):
    n = classes * per_class
    ds = Dataset(np.zeros((n, 1)), np.repeat(np.arange(classes), per_class), classes)
    stratified = data.draw(st.booleans())
    train = data.draw(st.integers(0, n))
    val = data.draw(st.integers(0, n - train))
    seed = data.draw(st.integers(0, 2**32 - 1))
    try:
        s = make_splits(ds, train, val, seed, stratified)
    except ValueError:
        # only stratification can make feasible totals fail
        assert stratified
        return
    parts = [s.train_idx, s.val_idx, s.test_idx]
    joined = np.concatenate(parts)
    assert np.array_equal(np.sort(joined), np.arange(n))
    assert (s.train_idx.size, s.val_idx.size) == (train, val)


# ----------------------------------------------------------------------------
# synthetic blobs


def test_blob_examples():
    ds = synth_blobs(3, 4, 5, 0.0, 0)
    assert np.array_equal(ds.features, np.eye(3, 5)[np.repeat(np.arange(3), 4)])
    ds = synth_blobs(3, 100, 10, 0.1, 0)
    assert nearest_centroid_accuracy(ds) >= 0.99
    again = synth_blobs(3, 100, 10, 0.1, 0)
    assert ds.features.tobytes() == again.features.tobytes()
    with pytest.raises(ValueError):
        synth_blobs(4, 2, 3, 0.1, 0)
