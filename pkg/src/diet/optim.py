"""AdamW with decoupled weight decay, an SGD+momentum baseline, and the
linear-warmup / cosine-annealing schedule with batch-size learning-rate scaling.

The peak learning rate is ``base_lr * batch_size / 256``.  The schedule is
interpolated per step: linear from 0 over the warmup steps, then a half cosine
from the peak down to ``final_lr_floor``, reaching the floor exactly on the
last executed step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, SpecError

ADAMW = "adamw"
SGD = "sgd"

REFERENCE_BATCH_SIZE = 256


@dataclass(frozen=True)
class OptimConfig:
    kind: str = ADAMW
    base_lr: float = 0.001
    weight_decay: float = 0.05
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    momentum: float = 0.0
    warmup_epochs: int = 10
    total_epochs: int = 100
    batch_size: int = 256
    final_lr_floor: float = 0.0

    def __post_init__(self):
        if self.kind not in (ADAMW, SGD):
            raise SpecError(f"unknown optimizer kind: {self.kind!r}")
        if self.base_lr <= 0:
            raise SpecError(f"base_lr must be > 0, got {self.base_lr}")
        if not 0 <= self.warmup_epochs <= self.total_epochs:
            raise SpecError(
                f"need 0 <= warmup_epochs <= total_epochs, got "
                f"{self.warmup_epochs} / {self.total_epochs}"
            )
        if self.batch_size < 1:
            raise SpecError(f"batch_size must be >= 1, got {self.batch_size}")


# lr/wd pair used for transformer encoders in the reference setup; shipped for
# config fidelity even though this package only builds MLP encoders.
TRANSFORMER_PRESET = OptimConfig(base_lr=0.0002, weight_decay=0.01)


def scaled_lr(cfg: OptimConfig) -> float:
    """Peak learning rate under the linear scaling rule lr * bs / 256."""
    return cfg.base_lr * cfg.batch_size / REFERENCE_BATCH_SIZE


def lr_at(cfg: OptimConfig, step: int, steps_per_epoch: int) -> float:
    """Learning rate for a 0-based global step.

    Warmup covers steps [0, warmup); the cosine covers [warmup, total) and
    hits ``final_lr_floor`` at step total-1.  Steps beyond the schedule stay
    at the floor.
    """
    if step < 0:
        raise SpecError(f"step must be >= 0, got {step}")
    peak = scaled_lr(cfg)
    warmup_steps = cfg.warmup_epochs * steps_per_epoch
    total_steps = cfg.total_epochs * steps_per_epoch
    if step < warmup_steps:
        return peak * step / warmup_steps
    if step >= total_steps:
        return cfg.final_lr_floor
    span = max(1, total_steps - 1 - warmup_steps)
    progress = min(1.0, (step - warmup_steps) / span)
    return cfg.final_lr_floor + (peak - cfg.final_lr_floor) * 0.5 * (
        1.0 + math.cos(math.pi * progress)
    )


@dataclass
class OptimState:
    """Per-parameter moment/velocity arrays mirroring one parameter group."""

    kind: str
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    velocity: list[np.ndarray] = field(default_factory=list)


def init_optim_state(params: list[np.ndarray], cfg: OptimConfig) -> OptimState:
    if cfg.kind == ADAMW:
        return OptimState(
            ADAMW,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )
    return OptimState(SGD, velocity=[np.zeros_like(p) for p in params])


def _check_shapes(params, grads, state_arrays):
    if len(params) != len(grads) or len(params) != len(state_arrays):
        raise DimensionError("params, grads and state must have the same length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise DimensionError(f"grad shape {g.shape} != param shape {p.shape}")


def adamw_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: OptimState,
    lr: float,
    cfg: OptimConfig,
) -> tuple[list[np.ndarray], OptimState]:
    """One AdamW update, in place.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2, both bias-corrected;
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta.
    The decay is decoupled: it never enters the adaptive term.
    """
    _check_shapes(params, grads, state.m)
    b1, b2 = cfg.betas
    state.step += 1
    t = state.step
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        denom = np.sqrt(v / c2)
        denom += cfg.eps
        update = m / denom
        update *= lr / c1
        if cfg.weight_decay:
            update += (lr * cfg.weight_decay) * p
        p -= update
    return params, state


def sgd_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: OptimState,
    lr: float,
    cfg: OptimConfig,
) -> tuple[list[np.ndarray], OptimState]:
    """Momentum SGD, in place: velocity <- momentum*velocity + g; theta -= lr*velocity."""
    _check_shapes(params, grads, state.velocity)
    state.step += 1
    for p, g, vel in zip(params, grads, state.velocity):
        vel *= cfg.momentum
        vel += g
        p -= lr * vel
    return params, state


def apply_step(params, grads, state: OptimState, lr: float, cfg: OptimConfig):
    if cfg.kind == ADAMW:
        return adamw_step(params, grads, state, lr, cfg)
    return sgd_step(params, grads, state, lr, cfg)
