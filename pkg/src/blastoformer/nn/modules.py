"""Thin nn.Module holders for parameters; the math lives in :mod:`ops`."""
from __future__ import annotations

import math

import torch
from torch import nn

from . import ops


def fan_in_uniform(shape, fan_in: int, gen: torch.Generator) -> torch.Tensor:
    bound = 1.0 / math.sqrt(fan_in)
    return (torch.rand(*shape, generator=gen, dtype=torch.float64) * 2.0 - 1.0) * bound


class Linear(nn.Module):
    def __init__(self, d_in: int, d_out: int, gen: torch.Generator, bias: bool = True):
        super().__init__()
        self.W = nn.Parameter(fan_in_uniform((d_in, d_out), d_in, gen))
        self.b = nn.Parameter(fan_in_uniform((d_out,), d_in, gen)) if bias else None

    def forward(self, x):
        return ops.linear(x, self.W, self.b)


class LayerNorm(nn.Module):
    def __init__(self, d: int):
        super().__init__()
        self.gamma = nn.Parameter(torch.ones(d, dtype=torch.float64))
        self.beta = nn.Parameter(torch.zeros(d, dtype=torch.float64))

    def forward(self, x):
        return ops.layer_norm(x, self.gamma, self.beta)


class Conv3x3(nn.Module):
    def __init__(self, c_in: int, c_out: int, gen: torch.Generator):
        super().__init__()
        fan_in = c_in * 9
        self.kernels = nn.Parameter(fan_in_uniform((c_out, c_in, 3, 3), fan_in, gen))
        self.bias = nn.Parameter(fan_in_uniform((c_out,), fan_in, gen))

    def forward(self, x):
        return ops.conv2d(x, self.kernels, self.bias)


def make_generator(seed: int) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(int(seed))
    return gen
