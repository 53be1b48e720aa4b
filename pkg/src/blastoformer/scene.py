"""Randomized blast scenarios and their grid encodings.

A scenario is three axis-aligned box obstacles sharing a y band plus a point
charge.  ``build_model_input`` turns it into the 4-channel grid used by every
model: one footprint SDF channel per obstacle and a mass-weighted inverse
distance channel for the charge.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

# Sampling windows (meters / kg).
OBSTACLE_X_WINDOWS = (
    ((-4.9, -4.5), (-2.5, 2.25)),
    ((-2.0, -1.9), (1.0, 1.5)),
    ((1.5, 2.5), (4.5, 4.9)),
)
Y_MIN_RANGE = (2.0, 3.0)
H_Y_RANGE = (0.5, 1.0)
H_Z_RANGE = (0.5, 2.0)
CHARGE_X_RANGE = (-4.9, 4.9)
CHARGE_Y_RANGE = (-4.9, 2.0)
CHARGE_MASS_RANGE = (5.0, 50.0)

# Inverse-distance clamp for the charge channel: half the default probe spacing.
CHARGE_EPS = 0.05

N_CHANNELS = 4


@dataclass(frozen=True)
class Obstacle:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z_min: float
    z_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max and self.z_min < self.z_max):
            raise ValueError(f"degenerate obstacle {self}")

    def contains_footprint(self, px: float, py: float) -> bool:
        """Closed-rectangle membership; boundary counts as inside."""
        return self.x_min <= px <= self.x_max and self.y_min <= py <= self.y_max

    def bounds(self) -> tuple[float, ...]:
        return (self.x_min, self.x_max, self.y_min, self.y_max, self.z_min, self.z_max)


@dataclass(frozen=True)
class Charge:
    x: float
    y: float
    mass: float


@dataclass(frozen=True)
class Scenario:
    obstacles: tuple[Obstacle, Obstacle, Obstacle]
    charge: Charge
    seed: int = 0

    def __post_init__(self):
        if len(self.obstacles) != 3:
            raise ValueError("a scenario holds exactly three obstacles")

    def to_json(self) -> str:
        """Canonical JSON with every number printed at 17 significant digits."""
        def num(v: float) -> str:
            return format(float(v), ".17g")

        charge = (f'{{"x":{num(self.charge.x)},"y":{num(self.charge.y)},'
                  f'"mass":{num(self.charge.mass)}}}')
        keys = ("x_min", "x_max", "y_min", "y_max", "z_min", "z_max")
        obs = ",".join(
            "{" + ",".join(f'"{k}":{num(getattr(o, k))}' for k in keys) + "}"
            for o in self.obstacles
        )
        return f'{{"seed":{int(self.seed)},"charge":{charge},"obstacles":[{obs}]}}'

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        d = json.loads(text)
        obstacles = tuple(Obstacle(**{k: float(v) for k, v in o.items()}) for o in d["obstacles"])
        c = d["charge"]
        return cls(obstacles=obstacles,
                   charge=Charge(float(c["x"]), float(c["y"]), float(c["mass"])),
                   seed=int(d.get("seed", 0)))


@dataclass(frozen=True)
class GridSpec:
    """Probe lattice on the plane z = z_probe; point (i, j) sits at (x0+i*dx, y0+j*dy)."""

    nx: int = 99
    ny: int = 99
    x0: float = -4.9
    y0: float = -4.9
    dx: float = 0.1
    dy: float = 0.1
    z_probe: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 points per axis")
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError("grid spacing must be positive")

    @classmethod
    def square(cls, side: int) -> "GridSpec":
        """``side`` x ``side`` lattice spanning [-4.9, 4.9] on both axes."""
        step = 9.8 / (side - 1)
        if side == 99:
            step = 0.1
        return cls(nx=side, ny=side, dx=step, dy=step)

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + np.arange(self.nx) * self.dx

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + np.arange(self.ny) * self.dy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) arrays of shape (ny, nx)."""
        return np.meshgrid(self.xs, self.ys, indexing="xy")

    def to_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "x0": self.x0, "y0": self.y0,
                "dx": self.dx, "dy": self.dy, "z_probe": self.z_probe}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(**d)


@dataclass
class InputTensor:
    values: np.ndarray  # (ny, nx, 4): three obstacle SDFs, then the charge channel
    coords: np.ndarray  # (ny, nx, 2): (x, y) in meters


def _uniform(rng: np.random.Generator, lo_hi: tuple[float, float]) -> float:
    return float(rng.uniform(lo_hi[0], lo_hi[1]))


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream for one seed; datasets use ``base_seed + index`` per sample."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def sample_scenario(seed: int) -> Scenario:
    rng = make_rng(seed)
    y_min = _uniform(rng, Y_MIN_RANGE)
    y_max = y_min + _uniform(rng, H_Y_RANGE)
    obstacles = []
    for (xmin_rng, xmax_rng) in OBSTACLE_X_WINDOWS:
        x_min = _uniform(rng, xmin_rng)
        x_max = _uniform(rng, xmax_rng)
        h_z = _uniform(rng, H_Z_RANGE)
        obstacles.append(Obstacle(x_min, x_max, y_min, y_max, 0.0, h_z))
    mass = _uniform(rng, CHARGE_MASS_RANGE)
    while True:
        cx = _uniform(rng, CHARGE_X_RANGE)
        cy = _uniform(rng, CHARGE_Y_RANGE)
        if not any(o.contains_footprint(cx, cy) for o in obstacles):
            break
    return Scenario(obstacles=tuple(obstacles), charge=Charge(cx, cy, mass), seed=int(seed))


def box_sdf_footprint(px, py, obstacle: Obstacle):
    """Distance from (px, py) to the obstacle's x-y footprint, or -1 inside/on it.

    Works on scalars and on numpy arrays alike.
    """
    ox = np.maximum(np.maximum(obstacle.x_min - px, 0.0), px - obstacle.x_max)
    oy = np.maximum(np.maximum(obstacle.y_min - py, 0.0), py - obstacle.y_max)
    dist = np.hypot(ox, oy)
    out = np.where(dist > 0.0, dist, -1.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


def obstacle_sdf_field(s: Scenario, g: GridSpec, k: int) -> np.ndarray:
    if not 0 <= k < len(s.obstacles):
        raise IndexError(f"obstacle index {k} out of range")
    X, Y = g.mesh()
    return box_sdf_footprint(X, Y, s.obstacles[k])


def charge_field(s: Scenario, g: GridSpec) -> np.ndarray:
    X, Y = g.mesh()
    d = np.hypot(X - s.charge.x, Y - s.charge.y)
    return s.charge.mass / np.maximum(d, CHARGE_EPS)


def grid_coords(g: GridSpec) -> np.ndarray:
    X, Y = g.mesh()
    return np.stack([X, Y], axis=-1)


def build_model_input(s: Scenario, g: GridSpec) -> InputTensor:
    channels = [obstacle_sdf_field(s, g, k) for k in range(3)]
    channels.append(charge_field(s, g))
    return InputTensor(values=np.stack(channels, axis=-1), coords=grid_coords(g))


def domain_diagonal(g: GridSpec) -> float:
    return math.hypot((g.nx - 1) * g.dx, (g.ny - 1) * g.dy)
