"""Dense feed-forward networks: forward pass, losses, backprop, snapshots.

A network is an ordered list of :class:`Layer` objects.  Each layer maps an
input ``h`` of length ``N`` to ``act(W @ h + b)`` where ``W`` has shape
``(M, N)``.  Everything is float64.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError, InvalidInputError, NumericalError

SNAPSHOT_FORMAT = "gdsolver-dnn"
SNAPSHOT_VERSION = 1


class Activation(str, Enum):
    RELU = "relu"
    IDENTITY = "identity"


class LossKind(str, Enum):
    MSE = "mse"
    L1 = "l1"
    SOFTMAX_CE = "softmax_ce"


@dataclass
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.RELU

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64, ndmin=2)
        self.bias = np.array(self.bias, dtype=np.float64).reshape(-1)
        self.activation = Activation(self.activation)
        if self.weights.ndim != 2:
            raise InvalidInputError("weights must be a matrix")
        if self.bias.shape[0] != self.weights.shape[0]:
            raise InvalidInputError(
                f"bias length {self.bias.shape[0]} != weight rows {self.weights.shape[0]}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise InvalidInputError("layer parameters must be finite")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def preactivation(self, H: np.ndarray) -> np.ndarray:
        return H @ self.weights.T + self.bias

    def apply(self, H: np.ndarray) -> np.ndarray:
        """Evaluate the layer on a batch ``H`` of shape ``(T, n_in)``."""
        A = self.preactivation(H)
        if self.activation is Activation.RELU:
            return np.maximum(A, 0.0)
        return A

    def copy(self) -> "Layer":
        return Layer(self.weights.copy(), self.bias.copy(), self.activation)


@dataclass
class Dnn:
    layers: list[Layer] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise InvalidInputError("a network needs at least one layer")
        for k in range(len(self.layers) - 1):
            if self.layers[k + 1].n_in != self.layers[k].n_out:
                raise InvalidInputError(
                    f"layer {k + 1} expects {self.layers[k + 1].n_in} inputs, "
                    f"layer {k} produces {self.layers[k].n_out}")

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    @property
    def final(self) -> Layer:
        return self.layers[-1]

    def params(self) -> list[np.ndarray]:
        """Flat parameter list ``[W0, b0, W1, b1, ...]`` (views, not copies)."""
        out = []
        for layer in self.layers:
            out.extend((layer.weights, layer.bias))
        return out

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        if len(params) != 2 * len(self.layers):
            raise InvalidInputError("parameter list does not match the network")
        for k, layer in enumerate(self.layers):
            W, b = params[2 * k], params[2 * k + 1]
            if W.shape != layer.weights.shape or b.shape != layer.bias.shape:
                raise InvalidInputError(f"parameter shape mismatch at layer {k}")
            layer.weights = np.asarray(W, dtype=np.float64)
            layer.bias = np.asarray(b, dtype=np.float64)

    def copy(self) -> "Dnn":
        return Dnn([layer.copy() for layer in self.layers])


def init_dnn(sizes: Sequence[int], output_activation=Activation.IDENTITY,
             hidden_activation=Activation.RELU, seed: int = 0) -> Dnn:
    """Glorot-uniform initialised network with layer widths ``sizes``.

    Biases start at zero.  ``sizes=[1, 16, 16, 1]`` gives two ReLU hidden
    layers and an identity output.
    """
    if len(sizes) < 2:
        raise InvalidInputError("need at least input and output sizes")
    rng = np.random.default_rng(seed)
    layers = []
    for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        limit = np.sqrt(6.0 / (n_in + n_out))
        W = rng.uniform(-limit, limit, size=(n_out, n_in))
        act = output_activation if k == len(sizes) - 2 else hidden_activation
        layers.append(Layer(W, np.zeros(n_out), act))
    return Dnn(layers)


def _as_batch(dnn: Dnn, X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dnn.n_in:
        raise InvalidInputError(
            f"input has shape {X.shape[1:] if X.ndim == 2 else X.shape}, "
            f"network expects {dnn.n_in} features")
    return X, single


def forward(dnn: Dnn, x) -> np.ndarray:
    """Network output for one input vector or a ``(T, d)`` batch."""
    X, single = _as_batch(dnn, x)
    for layer in dnn.layers:
        X = layer.apply(X)
    return X[0] if single else X


def hidden_features(dnn: Dnn, X) -> np.ndarray:
    """Inputs to the final layer for every row of ``X``.

    A single-layer network has nothing before its final layer, so the rows
    of ``X`` are returned unchanged.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        return np.zeros((0, dnn.final.n_in))
    H, _ = _as_batch(dnn, X)
    for layer in dnn.layers[:-1]:
        H = layer.apply(H)
    return H


def _log_softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=-1, keepdims=True)
    return Z - np.log(np.exp(Z).sum(axis=-1, keepdims=True))


def loss(pred, target, kind: LossKind) -> float:
    """Loss of a single prediction.

    MSE averages squared errors over output dims, L1 sums absolute errors,
    and softmax cross-entropy takes an integer class label as ``target``.
    """
    kind = LossKind(kind)
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    if kind is LossKind.SOFTMAX_CE:
        label = int(target)
        if not 0 <= label < pred.shape[0]:
            raise InvalidInputError(f"label {label} out of range for {pred.shape[0]} logits")
        return float(-_log_softmax(pred)[label])
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if target.shape != pred.shape:
        raise InvalidInputError(f"prediction shape {pred.shape} != target shape {target.shape}")
    if kind is LossKind.MSE:
        return float(np.mean((pred - target) ** 2))
    return float(np.sum(np.abs(pred - target)))


def batch_loss(dnn: Dnn, X, Y, kind: LossKind) -> float:
    """Mean per-sample loss of ``dnn`` over a dataset."""
    kind = LossKind(kind)
    P = forward(dnn, np.atleast_2d(X))
    if kind is LossKind.SOFTMAX_CE:
        labels = np.asarray(Y, dtype=np.int64).reshape(-1)
        return float(-np.mean(_log_softmax(P)[np.arange(len(labels)), labels]))
    Y = np.asarray(Y, dtype=np.float64).reshape(P.shape)
    if kind is LossKind.MSE:
        return float(np.mean((P - Y) ** 2))
    return float(np.mean(np.sum(np.abs(P - Y), axis=1)))


def accuracy(dnn: Dnn, X, labels) -> float:
    P = forward(dnn, np.atleast_2d(X))
    return float(np.mean(np.argmax(P, axis=1) == np.asarray(labels)))


def backward(dnn: Dnn, X, Y, kind: LossKind) -> list[np.ndarray]:
    """Mean-over-batch gradient of the loss, aligned with ``dnn.params()``.

    The ReLU derivative at exactly zero is taken as zero.
    """
    kind = LossKind(kind)
    X, _ = _as_batch(dnn, X)
    T = X.shape[0]
    if T == 0:
        raise InvalidInputError("backward needs a non-empty batch")

    acts = [X]
    pre = []
    for layer in dnn.layers:
        Z = layer.preactivation(acts[-1])
        pre.append(Z)
        acts.append(np.maximum(Z, 0.0) if layer.activation is Activation.RELU else Z)
    P = acts[-1]
    if not np.all(np.isfinite(P)):
        raise NumericalError("non-finite network output during backward pass")

    if kind is LossKind.SOFTMAX_CE:
        labels = np.asarray(Y, dtype=np.int64).reshape(-1)
        if labels.shape[0] != T:
            raise InvalidInputError("label count does not match batch size")
        G = np.exp(_log_softmax(P))
        G[np.arange(T), labels] -= 1.0
        G /= T
    else:
        if np.size(Y) != P.size:
            raise InvalidInputError(f"target shape {np.shape(Y)} does not match output {P.shape}")
        Yf = np.asarray(Y, dtype=np.float64).reshape(P.shape)
        if kind is LossKind.MSE:
            G = 2.0 * (P - Yf) / (T * P.shape[1])
        else:
            G = np.sign(P - Yf) / T

    grads: list[np.ndarray] = [None] * (2 * len(dnn.layers))  # type: ignore[list-item]
    for k in range(len(dnn.layers) - 1, -1, -1):
        layer = dnn.layers[k]
        if layer.activation is Activation.RELU:
            G = G * (pre[k] > 0.0)
        grads[2 * k] = G.T @ acts[k]
        grads[2 * k + 1] = G.sum(axis=0)
        if k > 0:
            G = G @ layer.weights
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient during backward pass")
    return grads


# -- snapshots -------------------------------------------------------------

def dnn_to_dict(dnn: Dnn) -> dict:
    return {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "layers": [
            {
                "in": layer.n_in,
                "out": layer.n_out,
                "activation": layer.activation.value,
                "weights": [float(v) for v in layer.weights.reshape(-1)],
                "bias": [float(v) for v in layer.bias],
            }
            for layer in dnn.layers
        ],
    }


def dnn_from_dict(doc: dict) -> Dnn:
    if doc.get("format") != SNAPSHOT_FORMAT:
        raise FormatError(f"not a {SNAPSHOT_FORMAT} document")
    if doc.get("version") != SNAPSHOT_VERSION:
        raise FormatError(f"unsupported snapshot version {doc.get('version')!r}")
    layers = []
    try:
        for k, spec in enumerate(doc["layers"]):
            n_in, n_out = int(spec["in"]), int(spec["out"])
            w = np.array(spec["weights"], dtype=np.float64)
            if w.shape != (n_in * n_out,):
                raise FormatError(f"layer {k}: expected {n_in * n_out} weights, got {w.size}")
            layers.append(Layer(w.reshape(n_out, n_in), spec["bias"], spec["activation"]))
        return Dnn(layers)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed network snapshot: {exc}") from exc


def save_dnn(dnn: Dnn, path) -> None:
    """Write a JSON snapshot.  Floats use the shortest repr that round-trips."""
    Path(path).write_text(json.dumps(dnn_to_dict(dnn), indent=1) + "\n")


def load_dnn(path) -> Dnn:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return dnn_from_dict(doc)
