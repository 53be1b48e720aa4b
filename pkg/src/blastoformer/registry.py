"""Model kinds by name, and tensor batches shared by all of them."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import torch
from torch import nn

from .baselines import CNN, FNO, CnnConfig, FnoConfig, conditioning_vector
from .model import BlastOFormer, BlastOFormerConfig
from .scene import GridSpec

MODEL_KINDS = ("blastoformer", "fno", "cnn")


class Batch(NamedTuple):
    values: torch.Tensor  # [B, ny, nx, 4]
    coords: torch.Tensor  # [B, ny, nx, 2]
    cond: torch.Tensor    # [B, 21]


def build_config(kind: str, overrides: dict | None, grid: GridSpec):
    overrides = dict(overrides or {})
    if kind == "blastoformer":
        overrides.update(nx=grid.nx, ny=grid.ny)
        return BlastOFormerConfig(**overrides)
    if kind == "cnn":
        return CnnConfig(**overrides)
    if kind == "fno":
        return FnoConfig(**overrides)
    raise ValueError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")


def build_model(kind: str, overrides: dict | None, grid: GridSpec) -> nn.Module:
    cfg = build_config(kind, overrides, grid)
    cls = {"blastoformer": BlastOFormer, "cnn": CNN, "fno": FNO}[kind]
    return cls(cfg)


def make_batch(samples, dtype=torch.float32) -> Batch:
    values = torch.from_numpy(np.stack([s.input.values for s in samples])).to(dtype)
    coords = torch.from_numpy(np.stack([s.input.coords for s in samples])).to(dtype)
    cond = torch.from_numpy(np.stack([conditioning_vector(s.scenario) for s in samples])).to(dtype)
    return Batch(values, coords, cond)


def run_model(model: nn.Module, batch: Batch) -> torch.Tensor:
    return model(batch.values, batch.coords, batch.cond)
