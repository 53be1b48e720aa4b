"""CNN and FNO comparison models."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from . import scene
from .nn import ops
from .nn.modules import Conv3x3, Linear, make_generator

# ------------------------------------------------------------------- CNN


@dataclass(frozen=True)
class CnnConfig:
    layers: int = 6
    base_channels: int = 128
    in_channels: int = 4
    model_seed: int = 0

    def __post_init__(self):
        if self.layers < 2:
            raise ValueError("CNN needs at least two layers")

    @property
    def channels(self) -> tuple[int, ...]:
        return (self.in_channels,) + (self.base_channels,) * (self.layers - 1) + (1,)

    def to_dict(self) -> dict:
        return asdict(self)


class CNN(nn.Module):
    """Stack of 3x3 convs on the 4-channel SDF grid, ReLU between layers."""

    kind = "cnn"

    def __init__(self, cfg: CnnConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or CnnConfig()
        gen = make_generator(cfg.model_seed)
        ch = cfg.channels
        self.layers = nn.ModuleList(Conv3x3(a, b, gen) for a, b in zip(ch[:-1], ch[1:]))

    def forward(self, values: torch.Tensor, coords=None, cond=None) -> torch.Tensor:
        """values [..., ny, nx, 4] -> [..., ny, nx]."""
        if values.shape[-1] != self.cfg.in_channels:
            raise ValueError(f"CNN expects {self.cfg.in_channels} input channels")
        x = values.movedim(-1, -3)
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = ops.relu(x)
        return x.squeeze(-3)


def cnn_param_count(cfg: CnnConfig) -> int:
    ch = cfg.channels
    return sum(a * b * 9 + b for a, b in zip(ch[:-1], ch[1:]))


# -------------------------------------------------------- conditioning

def _conditioning_ranges() -> list[tuple[float, float]]:
    y_max_range = (scene.Y_MIN_RANGE[0] + scene.H_Y_RANGE[0], scene.Y_MIN_RANGE[1] + scene.H_Y_RANGE[1])
    ranges = []
    for xmin_rng, xmax_rng in scene.OBSTACLE_X_WINDOWS:
        ranges += [xmin_rng, xmax_rng, scene.Y_MIN_RANGE, y_max_range, (0.0, 0.0), scene.H_Z_RANGE]
    ranges += [scene.CHARGE_X_RANGE, scene.CHARGE_Y_RANGE, scene.CHARGE_MASS_RANGE]
    return ranges


CONDITIONING_RANGES = np.array(_conditioning_ranges())
N_COND = len(CONDITIONING_RANGES)  # 21


def _raw_conditioning(s: scene.Scenario) -> np.ndarray:
    vals = [v for o in s.obstacles for v in o.bounds()]
    vals += [s.charge.x, s.charge.y, s.charge.mass]
    return np.array(vals, dtype=np.float64)


def conditioning_vector(s: scene.Scenario) -> np.ndarray:
    """18 obstacle bounds + charge (x, y, mass), each mapped affinely onto [-1, 1]
    from its sampling interval.  Fixed entries (z_min = 0) map to 0."""
    lo, hi = CONDITIONING_RANGES[:, 0], CONDITIONING_RANGES[:, 1]
    raw = _raw_conditioning(s)
    width = hi - lo
    out = np.zeros(N_COND)
    live = width > 0
    out[live] = 2.0 * (raw[live] - lo[live]) / width[live] - 1.0
    return out


def conditioning_inverse(c: np.ndarray) -> np.ndarray:
    lo, hi = CONDITIONING_RANGES[:, 0], CONDITIONING_RANGES[:, 1]
    return lo + (np.asarray(c) + 1.0) * 0.5 * (hi - lo)


# ------------------------------------------------------------------- FNO


@dataclass(frozen=True)
class FnoConfig:
    modes1: int = 6
    modes2: int = 6
    width: int = 24
    layers: int = 4
    cond_channels: int = N_COND
    proj_hidden: int = 128
    model_seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class FourierLayer(nn.Module):
    def __init__(self, width: int, m1: int, m2: int, gen: torch.Generator):
        super().__init__()
        scale = 1.0 / (width * width)
        self.spectral = nn.Parameter(scale * torch.rand(2, width, width, m1, m2, 2, generator=gen,
                                                        dtype=torch.float64))
        self.skip = Linear(width, width, gen)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x is channel-last [..., ny, nx, width]."""
        w = torch.view_as_complex(self.spectral)
        spec = ops.spectral_conv2d(x.movedim(-1, -3), w).movedim(-3, -1)
        return spec + self.skip(x)


class FNO(nn.Module):
    """Charge channel plus 21 broadcast conditioning channels, lifted to
    ``width`` and passed through Fourier layers with pointwise skips."""

    kind = "fno"

    def __init__(self, cfg: FnoConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or FnoConfig()
        gen = make_generator(cfg.model_seed)
        self.lift = Linear(1 + cfg.cond_channels, cfg.width, gen)
        self.fourier = nn.ModuleList(FourierLayer(cfg.width, cfg.modes1, cfg.modes2, gen)
                                     for _ in range(cfg.layers))
        self.proj1 = Linear(cfg.width, cfg.proj_hidden, gen)
        self.proj2 = Linear(cfg.proj_hidden, 1, gen)

    def forward(self, values: torch.Tensor, coords=None, cond: torch.Tensor | None = None) -> torch.Tensor:
        """values [..., ny, nx, 4] (charge channel used), cond [..., 21] -> [..., ny, nx]."""
        if cond is None or cond.shape[-1] != self.cfg.cond_channels:
            raise ValueError(f"FNO needs a {self.cfg.cond_channels}-wide conditioning vector")
        charge = values[..., 3:4]
        ny, nx = charge.shape[-3:-1]
        cond_grid = cond[..., None, None, :].expand(*cond.shape[:-1], ny, nx, cond.shape[-1])
        x = self.lift(torch.cat([charge, cond_grid.to(charge.dtype)], dim=-1))
        for i, layer in enumerate(self.fourier):
            x = layer(x)
            if i < len(self.fourier) - 1:
                x = ops.relu(x)
        return self.proj2(ops.relu(self.proj1(x))).squeeze(-1)


def fno_param_count(cfg: FnoConfig) -> int:
    w = cfg.width
    lift = (1 + cfg.cond_channels) * w + w
    layer = 2 * w * w * cfg.modes1 * cfg.modes2 * 2 + w * w + w
    proj = w * cfg.proj_hidden + cfg.proj_hidden + cfg.proj_hidden + 1
    return lift + cfg.layers * layer + proj
