"""Reverse-mode gradient entry points on top of the torch tape."""
from __future__ import annotations

from typing import Iterable

import torch


class GraphConsumedError(RuntimeError):
    """Raised when backprop is asked to reuse a graph it already consumed."""


def zero_grad(params: Iterable[torch.Tensor]) -> None:
    """Give every parameter an explicit zero gradient (never ``None``)."""
    for p in params:
        if p.grad is None:
            p.grad = torch.zeros_like(p)
        else:
            p.grad.detach_()
            p.grad.zero_()


def backprop(loss: torch.Tensor) -> None:
    """Accumulate d(loss)/d(param) into ``.grad`` of every reachable parameter.

    A recorded forward pass can be differentiated once; run forward again
    before a second call.
    """
    if loss.dim() != 0:
        raise ValueError(f"backprop needs a scalar loss, got shape {tuple(loss.shape)}")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any parameter")
    if getattr(loss, "_bof_consumed", False):
        raise GraphConsumedError("graph already differentiated; re-run the forward pass")
    loss.backward()
    loss._bof_consumed = True
