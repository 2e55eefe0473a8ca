"""AdamW with decoupled weight decay.

    m <- b1 m + (1 - b1) g
    v <- b2 v + (1 - b2) g^2
    theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd theta)
"""

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import Tensor
from .errors import DimensionError, NumericError, ParameterError

logger = logging.getLogger(__name__)


@dataclass
class OptimizerState:
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    @classmethod
    def for_params(cls, params: Sequence[Tensor]) -> "OptimizerState":
        return cls(m=[np.zeros_like(p.data) for p in params], v=[np.zeros_like(p.data) for p in params])


def adamw_step(
    params: Sequence[Tensor],
    grads: Sequence[np.ndarray],
    state: OptimizerState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise DimensionError("parameters, gradients and optimizer state have different lengths")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != np.shape(g) or p.shape != m.shape:
            raise DimensionError(f"gradient shape {np.shape(g)} does not match parameter {p.shape}")
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NumericError("non-finite gradient; step rejected")

    state.step += 1
    bias1 = 1.0 - beta1**state.step
    bias2 = 1.0 - beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        update = (m / bias1) / (np.sqrt(v / bias2) + eps) + weight_decay * p.data
        p.data -= lr * update


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``; returns the norm before clipping."""
    grads = [p.grad for p in params if p.grad is not None]
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if norm > max_norm:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * factor
    return norm


class AdamW:
    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 1e-5,
    ):
        if lr < 0:
            raise ParameterError(f"invalid learning rate: {lr}")
        if not (0.0 <= betas[0] < 1.0 and 0.0 <= betas[1] < 1.0):
            raise ParameterError(f"invalid betas: {betas}")
        if weight_decay < 0:
            raise ParameterError(f"invalid weight decay: {weight_decay}")
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = OptimizerState.for_params(self.params)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        adamw_step(
            self.params,
            grads,
            self.state,
            self.lr,
            beta1=self.betas[0],
            beta2=self.betas[1],
            eps=self.eps,
            weight_decay=self.weight_decay,
        )
