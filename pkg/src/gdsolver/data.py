"""Datasets: synthetic regression tasks, Gaussian blobs, MNIST via IDX files, splits."""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError


class TaskKind(str, Enum):
    IDENTITY = "identity"
    AFFINE = "affine"
    POLY4 = "poly4"
    FORMULA = "formula"


def task_function(kind: TaskKind | str):
    """Closed form of each regression task."""
    kind = TaskKind(kind)
    if kind is TaskKind.IDENTITY:
        return lambda x: x
    if kind is TaskKind.AFFINE:
        return lambda x: 3.0 * x + 2.0
    if kind is TaskKind.POLY4:
        return lambda x: 0.1 * x ** 4 - x ** 2 + 2.0 * x
    return lambda x: np.sin(x) + np.exp(0.1 * x)


@dataclass(frozen=True)
class RegressionTask:
    kind: TaskKind = TaskKind.IDENTITY
    domain: tuple[float, float] = (-5.0, 5.0)
    noise_sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind(self.kind))
        lo, hi = self.domain
        if not lo < hi:
            raise InvalidInputError("regression domain must be a non-degenerate interval")
        if self.noise_sigma < 0:
            raise InvalidInputError("noise_sigma must be non-negative")


@dataclass
class Dataset:
    """``X`` is ``(T, d)``; ``Y`` is ``(T, M)`` reals or ``(T,)`` integer labels."""
    X: np.ndarray
    Y: np.ndarray
    kind: str  # "regression" | "classification"
    n_classes: int | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        if self.kind == "classification":
            self.Y = np.asarray(self.Y, dtype=np.int64).reshape(-1)
            if self.n_classes is None:
                self.n_classes = int(self.Y.max()) + 1 if self.Y.size else 0
        elif self.kind == "regression":
            self.Y = np.asarray(self.Y, dtype=np.float64)
            if self.Y.ndim == 1:
                self.Y = self.Y[:, None]
        else:
            raise InvalidInputError(f"unknown dataset kind {self.kind!r}")
        if len(self.X) != len(self.Y):
            raise InvalidInputError(f"{len(self.X)} inputs but {len(self.Y)} targets")

    def __len__(self) -> int:
        return len(self.X)

    @property
    def is_classification(self) -> bool:
        return self.kind == "classification"

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.Y[idx], self.kind, self.n_classes)


def gen_regression(task: RegressionTask, n: int, seed: int = 0) -> Dataset:
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = task.domain
    X = rng.uniform(lo, hi, size=(n, 1))
    Y = task_function(task.kind)(X)
    if task.noise_sigma > 0:
        Y = Y + rng.normal(0.0, task.noise_sigma, size=Y.shape)
    return Dataset(X, Y, "regression")


def gen_blobs(classes: int, n_per_class: int, d: int = 2, separation: float = 10.0,
              seed: int = 0) -> Dataset:
    """Unit-variance Gaussian clusters whose centres are pairwise ``>= separation`` apart."""
    if classes < 2:
        raise InvalidInputError("need at least two classes")
    if n_per_class < 1 or d < 1:
        raise InvalidInputError("n_per_class and d must be positive")
    rng = np.random.default_rng(seed)
    radius = separation * max(1.0, classes ** (1.0 / d))
    centres: list[np.ndarray] = []
    while len(centres) < classes:
        cand = rng.uniform(-radius, radius, size=d)
        if all(np.linalg.norm(cand - c) >= separation for c in centres):
            centres.append(cand)
        else:
            radius *= 1.01
    X = np.concatenate([c + rng.normal(size=(n_per_class, d)) for c in centres])
    Y = np.repeat(np.arange(classes), n_per_class)
    perm = rng.permutation(len(X))
    return Dataset(X[perm], Y[perm], "classification", classes)


@dataclass(frozen=True)
class Split:
    fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)
    seed: int = 0

    def __post_init__(self):
        if len(self.fractions) != 3 or any(f <= 0 for f in self.fractions):
            raise InvalidInputError("split fractions must be three positive numbers")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise InvalidInputError("split fractions must sum to 1")


def split(ds: Dataset, s: Split = Split()) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded permutation, then contiguous train/val/test slices."""
    T = len(ds)
    n_train = int(round(s.fractions[0] * T))
    n_val = int(round(s.fractions[1] * T))
    n_test = T - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise InvalidInputError(f"{T} points are too few for split {s.fractions}")
    perm = np.random.default_rng(s.seed).permutation(T)
    return (ds.subset(perm[:n_train]), ds.subset(perm[n_train:n_train + n_val]),
            ds.subset(perm[n_train + n_val:]))


# -- IDX ---------------------------------------------------------------------

_IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


@dataclass
class IdxTensor:
    dtype: int
    dims: tuple[int, ...]
    payload: np.ndarray

    def as_array(self) -> np.ndarray:
        return self.payload.reshape(self.dims)


def load_idx(data: bytes) -> IdxTensor:
    """Parse an IDX buffer: magic ``00 00 <dtype> <ndims>``, big-endian u32 dims, payload."""
    if len(data) < 4:
        raise FormatError("IDX buffer shorter than its 4-byte magic")
    if data[0] != 0 or data[1] != 0:
        raise FormatError(f"bad IDX magic {data[:4].hex()}: first two bytes must be zero")
    code, ndims = data[2], data[3]
    if code not in _IDX_DTYPES:
        raise FormatError(f"unsupported IDX dtype code 0x{code:02x}")
    header = 4 + 4 * ndims
    if len(data) < header:
        raise FormatError("IDX header truncated")
    dims = struct.unpack(f">{ndims}I", data[4:header])
    dtype = _IDX_DTYPES[code]
    count = int(np.prod(dims, dtype=np.int64)) if ndims else 1
    expected = count * dtype.itemsize
    body = data[header:]
    if len(body) < expected:
        raise FormatError(f"IDX payload truncated: expected {expected} bytes, found {len(body)}")
    if len(body) > expected:
        raise FormatError(f"IDX payload has {len(body) - expected} trailing bytes")
    payload = np.frombuffer(body, dtype=dtype, count=count).astype(dtype.newbyteorder("="))
    return IdxTensor(code, tuple(dims), payload)


def dump_idx(t: IdxTensor) -> bytes:
    dtype = _IDX_DTYPES[t.dtype]
    head = bytes([0, 0, t.dtype, len(t.dims)]) + struct.pack(f">{len(t.dims)}I", *t.dims)
    return head + np.asarray(t.payload).astype(dtype).tobytes()


def read_idx_file(path) -> IdxTensor:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".gz":
        raw = gzip.decompress(raw)
    return load_idx(raw)


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
        if (directory / name).exists():
            return directory / name
    raise FileNotFoundError(f"missing MNIST file {directory / stem} (or {stem}.gz)")


def load_mnist(directory, part: str = "train") -> Dataset:
    """Load an MNIST image/label pair; pixels are scaled to ``[0, 1]``."""
    directory = Path(directory)
    img_name, lbl_name = MNIST_FILES[part]
    images = read_idx_file(_find(directory, img_name))
    labels = read_idx_file(_find(directory, lbl_name))
    if len(images.dims) != 3 or len(labels.dims) != 1 or images.dims[0] != labels.dims[0]:
        raise FormatError(f"inconsistent MNIST shapes {images.dims} / {labels.dims}")
    X = images.as_array().reshape(images.dims[0], -1).astype(np.float64) / 255.0
    return Dataset(X, labels.payload.astype(np.int64), "classification", 10)
