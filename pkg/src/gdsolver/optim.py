"""Gradient-descent baselines (SGD, Adam, step-decay LRS) and plateau detection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

OPTIMIZER_NAMES = ("sgd", "sgd-lrs", "adam", "adam-lrs")


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 0.01

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise InvalidInputError("learning_rate must be positive and finite")


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps_stabilizer: float = 1e-8

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise InvalidInputError("learning_rate must be positive and finite")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidInputError("betas must lie in [0, 1)")
        if not self.eps_stabilizer > 0:
            raise InvalidInputError("eps_stabilizer must be positive")


class ScheduleKind(str, Enum):
    NONE = "none"
    STEP_DECAY = "step_decay"


@dataclass(frozen=True)
class LrSchedule:
    kind: ScheduleKind = ScheduleKind.NONE
    gamma: float = 0.5
    period_epochs: int = 5

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise InvalidInputError("gamma must lie in (0, 1]")
        if self.period_epochs < 1:
            raise InvalidInputError("period_epochs must be >= 1")


@dataclass(frozen=True)
class PlateauDetector:
    window: int = 3
    rel_tolerance: float = 0.01

    def __post_init__(self):
        if self.window < 2:
            raise InvalidInputError("plateau window must be >= 2")
        if self.rel_tolerance < 0:
            raise InvalidInputError("rel_tolerance must be non-negative")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def _check_aligned(params, grads):
    if len(params) != len(grads):
        raise InvalidInputError("params and grads have different lengths")
    for p, g in zip(params, grads):
        if np.shape(p) != np.shape(g):
            raise InvalidInputError(f"shape mismatch: {np.shape(p)} vs {np.shape(g)}")


def sgd_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
             lr: float) -> list[np.ndarray]:
    _check_aligned(params, grads)
    return [np.asarray(p, dtype=np.float64) - lr * np.asarray(g, dtype=np.float64)
            for p, g in zip(params, grads)]


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              cfg: AdamConfig, lr: float | None = None) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update.  Returns new params and a new state."""
    _check_aligned(params, grads)
    _check_aligned(params, state.m)
    _check_aligned(params, state.v)
    lr = cfg.learning_rate if lr is None else lr
    t = state.t + 1
    b1, b2 = cfg.beta1, cfg.beta2
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=np.float64)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_p.append(np.asarray(p, dtype=np.float64) - lr * m_hat / (np.sqrt(v_hat) + cfg.eps_stabilizer))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t)


def scheduled_lr(base_lr: float, epoch: int, schedule: LrSchedule) -> float:
    if epoch < 0:
        raise InvalidInputError("epoch must be >= 0")
    if schedule.kind is ScheduleKind.NONE:
        return base_lr
    return base_lr * schedule.gamma ** (epoch // schedule.period_epochs)


def plateau(history: Sequence[float], det: PlateauDetector) -> bool:
    """True when the last ``det.window`` losses improved by less than the tolerance."""
    if len(history) < det.window:
        return False
    oldest = history[-det.window]
    newest = history[-1]
    return (oldest - newest) / max(oldest, 1e-12) < det.rel_tolerance


@dataclass
class Optimizer:
    """Stateful wrapper used by the training loops.

    ``name`` is one of ``sgd``, ``sgd-lrs``, ``adam``, ``adam-lrs``.
    """
    name: str
    sgd: SgdConfig = field(default_factory=SgdConfig)
    adam: AdamConfig = field(default_factory=AdamConfig)
    schedule: LrSchedule = field(default_factory=LrSchedule)
    state: AdamState | None = None

    @property
    def uses_adam(self) -> bool:
        return self.name.startswith("adam")

    @property
    def base_lr(self) -> float:
        return self.adam.learning_rate if self.uses_adam else self.sgd.learning_rate

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
             epoch: int) -> list[np.ndarray]:
        lr = scheduled_lr(self.base_lr, epoch, self.schedule)
        if not self.uses_adam:
            return sgd_step(params, grads, lr)
        if self.state is None:
            self.state = AdamState.zeros_like(params)
        new_params, self.state = adam_step(params, grads, self.state, self.adam, lr)
        return new_params


def make_optimizer(name: str, learning_rate: float | None = None,
                   schedule: LrSchedule | None = None) -> Optimizer:
    """Build one of the four baselines from its CLI name.

    The ``-lrs`` variants default to step decay (gamma 0.5 every 5 epochs).
    """
    if name not in OPTIMIZER_NAMES:
        raise InvalidInputError(f"unknown optimizer {name!r}; choose from {', '.join(OPTIMIZER_NAMES)}")
    if schedule is None:
        schedule = LrSchedule(ScheduleKind.STEP_DECAY) if name.endswith("-lrs") else LrSchedule()
    opt = Optimizer(name, schedule=schedule)
    if learning_rate is not None:
        if name.startswith("adam"):
            opt.adam = AdamConfig(learning_rate=learning_rate)
        else:
            opt.sgd = SgdConfig(learning_rate=learning_rate)
    return opt
