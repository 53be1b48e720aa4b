"""AdamW with decoupled weight decay and the cosine learning-rate schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch


@dataclass
class OptimizerState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-2
    t: int = 0
    m: list[torch.Tensor] = field(default_factory=list)
    v: list[torch.Tensor] = field(default_factory=list)

    @classmethod
    def init(cls, params, **hyper) -> "OptimizerState":
        params = list(params)
        return cls(m=[torch.zeros_like(p) for p in params],
                   v=[torch.zeros_like(p) for p in params], **hyper)

    def hyperparameters(self) -> dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
                "eps": self.eps, "weight_decay": self.weight_decay, "t": self.t}


@torch.no_grad()
def adamw_step(params, state: OptimizerState) -> None:
    """One AdamW update in place.  Gradients are read, never cleared."""
    params = list(params)
    if len(state.m) != len(params) or len(state.v) != len(params):
        raise RuntimeError("optimizer state not initialised for these parameters")
    for p, m in zip(params, state.m):
        if m.shape != p.shape:
            raise RuntimeError("optimizer state shape does not match its parameter")
        if p.grad is None:
            raise RuntimeError("parameter has no gradient; run backprop first")
    state.t += 1
    b1, b2, lr = state.beta1, state.beta2, state.lr
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        if state.weight_decay:
            p.mul_(1.0 - lr * state.weight_decay)
        m.mul_(b1).add_(g, alpha=1.0 - b1)
        v.mul_(b2).addcmul_(g, g, value=1.0 - b2)
        denom = (v / bc2).sqrt_().add_(state.eps)
        p.addcdiv_(m / bc1, denom, value=-lr)


def cosine_lr(step: int, total: int, lr_max: float, lr_min: float = 0.0) -> float:
    if total < 1 or not 0 <= step <= total:
        raise ValueError(f"cosine_lr: step {step} outside [0, {total}]")
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * step / total))
