"""MILP encodings of a network's final layer over a batch of data.

Weight variables follow the input-major convention ``w_{i}_{j}``: input unit
``i`` feeding output unit ``j``, i.e. ``Layer.weights[j, i]``.  Every
encoding boxes the weights to ``current +- radius`` so the solver searches a
neighbourhood of the gradient-descent solution.

Strict inequalities are replaced by a margin ``eps``: an encoded regression
point must end up at least ``eps`` closer to its target, and a correctly
classified point must beat every other logit by ``eps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ConsistencyError, InvalidInputError
from .milp.model import INF, MilpModel, ObjSense, Sense, Variable
from .nn import Activation, Dnn, Layer


@dataclass(frozen=True)
class EncoderConfig:
    radius: float = 0.1
    bias_radius: float | None = None  # None: 10 * radius; math.inf: unbounded bias
    eps: float = 1e-4
    big_m: float | None = None  # None: derived from the data
    tighten: bool = True  # False drops the eps margin on max_loss caps
    objective: bool = True  # regression: minimise total L1 slack

    def __post_init__(self):
        if self.radius < 0 or not math.isfinite(self.radius):
            raise InvalidInputError("radius must be finite and >= 0")
        if not self.eps > 0:
            raise InvalidInputError("eps must be positive")
        if self.big_m is not None and not self.big_m > 0:
            raise InvalidInputError("big_m must be positive")
        if self.bias_radius is not None and self.bias_radius < 0:
            raise InvalidInputError("bias_radius must be >= 0")

    @property
    def effective_bias_radius(self) -> float:
        return 10.0 * self.radius if self.bias_radius is None else self.bias_radius


@dataclass
class Encoding:
    """A built model plus the bookkeeping that ties its variables to the layer."""
    model: MilpModel
    w: np.ndarray  # (N, M) variable ids
    b: np.ndarray  # (M,)
    a: np.ndarray  # (T, M)
    o: np.ndarray  # (T, M)
    z: np.ndarray | None  # (T, M) ReLU indicators
    big_m: float
    relu: bool
    datapoint_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


@dataclass
class RegressionEncoding(Encoding):
    u: np.ndarray = None  # (T, M) L1 slacks
    max_loss: np.ndarray = None  # (T, M)
    caps: np.ndarray = None  # (T, M) upper bound placed on u


@dataclass
class ClassificationEncoding(Encoding):
    c: np.ndarray = None  # (T,)
    s: dict = None  # (t, j) -> id, j != label
    labels: np.ndarray = None
    current_correct: int = 0
    min_correct: int = 0


def max_loss_table(current_outputs, targets) -> np.ndarray:
    """Per-point, per-output absolute error of the current network."""
    O = np.asarray(current_outputs, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if O.shape != Y.shape:
        raise InvalidInputError(f"outputs {O.shape} and targets {Y.shape} differ in shape")
    return np.abs(O - Y)


def activation_bound(layer: Layer, H: np.ndarray, cfg: EncoderConfig) -> float:
    """Upper bound on ``|a_{t,j}|`` over the whole search box."""
    if H.size == 0:
        return 0.0
    h1 = float(np.max(np.sum(np.abs(H), axis=1)))
    w_inf = float(np.max(np.abs(layer.weights))) + cfg.radius
    b_max = float(np.max(np.abs(layer.bias))) + cfg.effective_bias_radius
    return h1 * w_inf + b_max


def _resolve_big_m(layer: Layer, H: np.ndarray, cfg: EncoderConfig) -> float:
    bound = activation_bound(layer, H, cfg)
    if not math.isfinite(bound):
        if cfg.big_m is None:
            raise ConfigurationError("an unbounded bias box needs an explicit big_m")
        return cfg.big_m
    if cfg.big_m is None:
        return 2.0 * (bound + cfg.eps)
    if bound + cfg.eps > cfg.big_m / 2.0:
        raise ConfigurationError(
            f"big_m {cfg.big_m} too small: activations can reach {bound:.6g} on the encoded data")
    return cfg.big_m


def _check_inputs(layer: Layer, H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[1] != layer.n_in:
        raise InvalidInputError(f"features have shape {H.shape}, final layer expects {layer.n_in} inputs")
    if not np.all(np.isfinite(H)):
        raise InvalidInputError("features must be finite")
    return H


def _layer_block(model: MilpModel, layer: Layer, H: np.ndarray, cfg: EncoderConfig):
    """Variables and rows shared by both tasks: boxes, pre-activations, outputs."""
    N, M, T = layer.n_in, layer.n_out, H.shape[0]
    relu = layer.activation is Activation.RELU
    r, br = cfg.radius, cfg.effective_bias_radius
    big_m = _resolve_big_m(layer, H, cfg)

    w = np.empty((N, M), dtype=np.int64)
    for i in range(N):
        for j in range(M):
            wbar = layer.weights[j, i]
            w[i, j] = model.add_variable(Variable.continuous(f"w_{i}_{j}", wbar - r, wbar + r))
    b = np.empty(M, dtype=np.int64)
    for j in range(M):
        bbar = layer.bias[j]
        lo, hi = (-INF, INF) if math.isinf(br) else (bbar - br, bbar + br)
        b[j] = model.add_variable(Variable.continuous(f"b_{j}", lo, hi))
    a = np.empty((T, M), dtype=np.int64)
    o = np.empty((T, M), dtype=np.int64)
    for t in range(T):
        for j in range(M):
            a[t, j] = model.add_variable(Variable.continuous(f"a_{t}_{j}"))
    for t in range(T):
        for j in range(M):
            o[t, j] = model.add_variable(Variable.continuous(f"o_{t}_{j}", 0.0 if relu else -INF))
    z = None
    if relu:
        z = np.empty((T, M), dtype=np.int64)
        for t in range(T):
            for j in range(M):
                z[t, j] = model.add_variable(Variable.binary(f"z_{t}_{j}"))

    for t in range(T):
        for j in range(M):
            terms = [(1.0, a[t, j])]
            terms += [(-H[t, i], w[i, j]) for i in range(N)]
            terms.append((-1.0, b[j]))
            model.add_row(terms, Sense.EQ, 0.0, name=f"pre_{t}_{j}")
    for t in range(T):
        for j in range(M):
            if relu:
                # o >= 0 is the variable bound
                model.add_row([(1.0, o[t, j]), (-1.0, a[t, j])], Sense.GE, 0.0, name=f"relu_lo_{t}_{j}")
                model.add_row([(1.0, o[t, j]), (-1.0, a[t, j]), (big_m, z[t, j])], Sense.LE, big_m,
                              name=f"relu_act_{t}_{j}")
                model.add_row([(1.0, o[t, j]), (-big_m, z[t, j])], Sense.LE, 0.0, name=f"relu_off_{t}_{j}")
            else:
                model.add_row([(1.0, o[t, j]), (-1.0, a[t, j])], Sense.EQ, 0.0, name=f"out_{t}_{j}")
    return w, b, a, o, z, big_m, relu


def encode_regression(layer: Layer, H, Y, current_outputs=None, cfg: EncoderConfig | None = None,
                      max_loss=None) -> RegressionEncoding:
    """Final-layer MILP whose feasible points beat the current L1 error on every point.

    Each ``(t, j)`` gets a slack ``u >= |o - y|`` capped at its current
    absolute error minus ``eps``; points already within ``eps`` keep their
    current error as the cap.  ``max_loss`` overrides the caps' base values.
    """
    cfg = cfg or EncoderConfig()
    H = _check_inputs(layer, H)
    Y = np.asarray(Y, dtype=np.float64).reshape(H.shape[0], layer.n_out)
    if not np.all(np.isfinite(Y)):
        raise InvalidInputError("targets must be finite")
    if current_outputs is None:
        current_outputs = layer.apply(H)
    if max_loss is None:
        max_loss = max_loss_table(current_outputs, Y)
    max_loss = np.asarray(max_loss, dtype=np.float64).reshape(Y.shape)
    if np.any(max_loss < 0) or not np.all(np.isfinite(max_loss)):
        raise InvalidInputError("max_loss entries must be finite and >= 0")
    if cfg.tighten:
        caps = np.where(max_loss > cfg.eps, max_loss - cfg.eps, max_loss)
    else:
        caps = max_loss.copy()

    model = MilpModel()
    w, b, a, o, z, big_m, relu = _layer_block(model, layer, H, cfg)
    T, M = Y.shape
    u = np.empty((T, M), dtype=np.int64)
    for t in range(T):
        for j in range(M):
            u[t, j] = model.add_variable(Variable.continuous(f"u_{t}_{j}", 0.0, INF))
    for t in range(T):
        for j in range(M):
            model.add_row([(1.0, o[t, j]), (-1.0, u[t, j])], Sense.LE, Y[t, j], name=f"l1_hi_{t}_{j}")
            model.add_row([(-1.0, o[t, j]), (-1.0, u[t, j])], Sense.LE, -Y[t, j], name=f"l1_lo_{t}_{j}")
            model.add_row([(1.0, u[t, j])], Sense.LE, caps[t, j], name=f"cap_{t}_{j}")
    if cfg.objective:
        model.set_objective(ObjSense.MIN, [(1.0, v) for v in u.reshape(-1)])
    return RegressionEncoding(model, w, b, a, o, z, big_m, relu, np.arange(T), u=u,
                              max_loss=max_loss, caps=caps)


def encode_classification(layer: Layer, H, labels, current_correct: int | None = None,
                          cfg: EncoderConfig | None = None,
                          min_correct: int | None = None) -> ClassificationEncoding:
    """Final-layer MILP maximising the number of correctly classified points.

    ``c_t = 1`` forces every ``s_{t,j}`` on, and each ``s_{t,j}`` forces the
    label's logit to beat logit ``j`` by ``eps``.  The count of correct points
    must reach ``min_correct`` (default ``current_correct + 1``).
    """
    cfg = cfg or EncoderConfig()
    H = _check_inputs(layer, H)
    M = layer.n_out
    if M < 2:
        raise InvalidInputError("classification needs at least two output classes")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != H.shape[0]:
        raise InvalidInputError("one label per encoded point is required")
    if labels.size and (labels.min() < 0 or labels.max() >= M):
        raise InvalidInputError(f"labels must lie in [0, {M - 1}]")
    if current_correct is None:
        current_correct = int(np.sum(np.argmax(layer.apply(H), axis=1) == labels)) if H.size else 0
    if min_correct is None:
        min_correct = current_correct + 1

    model = MilpModel()
    w, b, a, o, z, big_m, relu = _layer_block(model, layer, H, cfg)
    T = H.shape[0]
    c = np.array([model.add_variable(Variable.binary(f"c_{t}")) for t in range(T)], dtype=np.int64)
    s = {}
    for t in range(T):
        for j in range(M):
            if j != labels[t]:
                s[t, j] = model.add_variable(Variable.binary(f"s_{t}_{j}"))
    for t in range(T):
        y = labels[t]
        for j in range(M):
            if j == y:
                continue
            model.add_row([(1.0, o[t, y]), (-1.0, o[t, j]), (-big_m, s[t, j])], Sense.GE,
                          cfg.eps - big_m, name=f"beat_{t}_{j}")
    for t in range(T):
        terms = [(1.0, s[t, j]) for j in range(M) if j != labels[t]]
        terms.append((-(M - 1.0), c[t]))
        model.add_row(terms, Sense.GE, 0.0, name=f"correct_{t}")
    model.add_row([(1.0, v) for v in c], Sense.GE, float(min_correct), name="accuracy_floor")
    model.set_objective(ObjSense.MAX, [(1.0, v) for v in c])
    return ClassificationEncoding(model, w, b, a, o, z, big_m, relu, np.arange(T), c=c, s=s,
                                  labels=labels, current_correct=current_correct,
                                  min_correct=min_correct)


def apply_solution(dnn: Dnn, encoding: Encoding, values) -> Dnn:
    """Copy of ``dnn`` whose final layer takes the solved ``w`` and ``b`` values."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (encoding.model.n_vars,):
        raise ConsistencyError(
            f"solution has {values.shape} entries, encoding has {encoding.model.n_vars} variables")
    out = dnn.copy()
    final = out.final
    if encoding.w.shape != (final.n_in, final.n_out):
        raise ConsistencyError("encoding does not match the network's final layer")
    final.weights = values[encoding.w].T.copy()
    final.bias = values[encoding.b].copy()
    return out
