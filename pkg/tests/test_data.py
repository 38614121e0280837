import gzip
import os
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gdsolver.data import (Dataset, IdxTensor, RegressionTask, Split, TaskKind, dump_idx,
                           gen_blobs, gen_regression, load_idx, load_mnist, read_idx_file, split,
                           task_function)
from gdsolver.errors import FormatError, InvalidInputError


@pytest.mark.parametrize("kind,x,y", [("identity", 2.0, 2.0), ("affine", 0.0, 2.0),
                                      ("poly4", 1.0, 1.1), ("formula", 0.0, 1.0)])
def test_task_closed_forms(kind, x, y):
    assert task_function(kind)(np.array([x]))[0] == pytest.approx(y)


def test_gen_regression_exact_and_seeded():
    for kind in TaskKind:
        ds = gen_regression(RegressionTask(kind), 50, seed=3)
        np.testing.assert_array_equal(ds.Y, task_function(kind)(ds.X))
        assert ds.X.min() >= -5 and ds.X.max() <= 5
    a = gen_regression(RegressionTask("affine", noise_sigma=0.1), 20, 1)
    b = gen_regression(RegressionTask("affine", noise_sigma=0.1), 20, 1)
    np.testing.assert_array_equal(a.Y, b.Y)
    assert not np.allclose(a.Y, 3 * a.X + 2)
    with pytest.raises(InvalidInputError):
        RegressionTask(domain=(1.0, 1.0))
    with pytest.raises(InvalidInputError):
        gen_regression(RegressionTask(), 0)


def test_blobs_separable_by_nearest_centroid():
    ds = gen_blobs(2, 200, d=2, separation=10.0, seed=0)
    centroids = np.stack([ds.X[ds.Y == k].mean(axis=0) for k in range(2)])
    pred = np.argmin(((ds.X[:, None, :] - centroids[None]) ** 2).sum(-1), axis=1)
    assert np.all(pred == ds.Y)


def test_blobs_shape_and_seed():
    ds = gen_blobs(3, 5, seed=1)
    assert len(ds) == 15 and ds.n_classes == 3 and sorted(Counter(ds.Y.tolist()).values()) == [5, 5, 5]
    np.testing.assert_array_equal(ds.X, gen_blobs(3, 5, seed=1).X)
    with pytest.raises(InvalidInputError):
        gen_blobs(1, 5)


def test_split_sizes_and_determinism():
    ds = gen_regression(RegressionTask(), 10, 0)
    parts = split(ds, Split((0.8, 0.1, 0.1), seed=4))
    assert [len(p) for p in parts] == [8, 1, 1]
    again = split(ds, Split((0.8, 0.1, 0.1), seed=4))
    for p, q in zip(parts, again):
        np.testing.assert_array_equal(p.X, q.X)
    with pytest.raises(InvalidInputError):
        split(gen_regression(RegressionTask(), 2, 0))
    with pytest.raises(InvalidInputError):
        Split((0.5, 0.5, 0.0))


@given(st.integers(3, 300), st.integers(0, 1000))
def test_split_partitions_dataset(T, seed):
    ds = Dataset(np.arange(T, dtype=float)[:, None], np.zeros(T), "regression")
    try:
        parts = split(ds, Split(seed=seed))
    except InvalidInputError:
        assert T < 20  # tiny sets cannot fill every part
        return
    ids = np.concatenate([p.X[:, 0] for p in parts])
    assert Counter(ids.tolist()) == Counter(range(T))


def test_idx_label_fixture(fixtures_dir):
    t = read_idx_file(os.path.join(fixtures_dir, "labels3.idx1-ubyte"))
    assert t.dtype == 0x08 and t.dims == (3,)
    np.testing.assert_array_equal(t.payload, [5, 0, 9])
    gz = read_idx_file(os.path.join(fixtures_dir, "labels3.idx1-ubyte.gz"))
    np.testing.assert_array_equal(gz.payload, [5, 0, 9])


def test_idx_image_fixture(fixtures_dir):
    t = read_idx_file(os.path.join(fixtures_dir, "images_2x2x3.idx3-ubyte"))
    assert t.dims == (2, 2, 3)
    arr = t.as_array()
    assert arr[0, 0].tolist() == [0, 255, 128] and arr[1, 1].tolist() == [40, 50, 60]


def test_idx_other_dtypes(fixtures_dir):
    f = read_idx_file(os.path.join(fixtures_dir, "floats.idx1-f8"))
    assert f.payload.tolist() == [1.0, -2.5]
    s = read_idx_file(os.path.join(fixtures_dir, "shorts.idx2-i2"))
    assert s.dims == (2, 1) and s.payload.tolist() == [-2, 258]


@pytest.mark.parametrize("raw", [
    bytes.fromhex("01000801" "00000003" "050009"),   # first byte nonzero
    bytes.fromhex("00010801"),                       # second byte nonzero
    bytes.fromhex("00000801" "00000003" "0500"),     # 3 items, 2 bytes
    bytes.fromhex("00000801" "00000003" "05000900"), # trailing byte
    bytes.fromhex("00000803" "00000002"),            # header cut short
    bytes.fromhex("00000701" "00000001" "00"),       # unknown dtype
    bytes.fromhex("0000"),
])
def test_idx_malformed(raw):
    with pytest.raises(FormatError):
        load_idx(raw)


@given(st.sampled_from([0x08, 0x09, 0x0B, 0x0C, 0x0D, 0x0E]),
       st.lists(st.integers(0, 4), min_size=1, max_size=3), st.integers(0, 1000))
def test_idx_round_trip(code, dims, seed):
    rng = np.random.default_rng(seed)
    count = int(np.prod(dims))
    raw = bytes([0, 0, code, len(dims)]) + b"".join(d.to_bytes(4, "big") for d in dims)
    width = {0x08: 1, 0x09: 1, 0x0B: 2, 0x0C: 4, 0x0D: 4, 0x0E: 8}[code]
    payload = rng.integers(0, 256, count * width, dtype=np.uint8).tobytes()
    if code in (0x0D, 0x0E):  # keep floats finite so equality is meaningful
        payload = np.abs(rng.normal(size=count)).astype(">f4" if code == 0x0D else ">f8").tobytes()
    t = load_idx(raw + payload)
    assert t.dims == tuple(dims)
    assert dump_idx(t) == raw + payload


def write_mnist(tmp_path, n=4, gz=False):
    imgs = IdxTensor(0x08, (n, 28, 28), (np.arange(n * 784) % 256).astype(np.uint8))
    lbls = IdxTensor(0x08, (n,), (np.arange(n) % 10).astype(np.uint8))
    for stem, t in (("train-images-idx3-ubyte", imgs), ("train-labels-idx1-ubyte", lbls)):
        data = dump_idx(t)
        if gz:
            (tmp_path / (stem + ".gz")).write_bytes(gzip.compress(data))
        else:
            (tmp_path / stem).write_bytes(data)


@pytest.mark.parametrize("gz", [False, True])
def test_load_mnist(tmp_path, gz):
    write_mnist(tmp_path, gz=gz)
    ds = load_mnist(tmp_path, "train")
    assert ds.X.shape == (4, 784) and ds.Y.tolist() == [0, 1, 2, 3]
    assert ds.X.max() <= 1.0 and ds.X[0, 255] == 1.0
    assert ds.n_classes == 10


def test_load_mnist_missing_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="t10k-images-idx3-ubyte"):
        load_mnist(tmp_path, "test")


def test_dataset_validation():
    with pytest.raises(InvalidInputError):
        Dataset(np.zeros((3, 1)), np.zeros(2), "regression")
    with pytest.raises(InvalidInputError):
        Dataset(np.zeros((3, 1)), np.zeros(3), "ranking")
