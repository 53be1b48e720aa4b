"""Oracle-labelled datasets, splits, and the log/normalization policy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import scene
from ..errors import DataError
from ..scene import GridSpec, InputTensor, Scenario
from .oracle import oracle_pressure

SPLITS = ("train", "val", "test")
# 1100 / 200 / 200 of 1500.
SPLIT_WEIGHTS = (1100, 200, 200)
MIN_SAMPLES = 15


@dataclass(frozen=True)
class NormStats:
    log_mean: float
    log_std: float

    def __post_init__(self):
        if not (np.isfinite(self.log_mean) and np.isfinite(self.log_std) and self.log_std > 0):
            raise DataError(f"invalid normalization statistics {self}")

    def to_dict(self) -> dict:
        return {"log_mean": self.log_mean, "log_std": self.log_std}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(float(d["log_mean"]), float(d["log_std"]))


@dataclass
class Sample:
    scenario: Scenario
    input: InputTensor   # float32 arrays
    pressure: np.ndarray  # (ny, nx) float32, Pa


@dataclass
class Dataset:
    samples: list[Sample]
    grid: GridSpec
    split: list[str]
    norm: NormStats
    base_seed: int = 0

    def indices(self, split: str) -> list[int]:
        if split not in SPLITS:
            raise DataError(f"unknown split {split!r}")
        return [i for i, tag in enumerate(self.split) if tag == split]

    def subset(self, split: str) -> list[Sample]:
        return [self.samples[i] for i in self.indices(split)]


def log_transform(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if not np.all(p > 0):
        raise DataError("log_transform needs strictly positive pressures")
    return np.log(p)


def unlog(l: np.ndarray) -> np.ndarray:
    return np.exp(np.asarray(l, dtype=np.float64))


def normalize(l, s: NormStats | None):
    if s is None:
        raise DataError("normalization statistics have not been fitted")
    return (l - s.log_mean) / s.log_std


def denormalize(z, s: NormStats | None):
    if s is None:
        raise DataError("normalization statistics have not been fitted")
    return z * s.log_std + s.log_mean


def fit_norm(pressures: list[np.ndarray]) -> NormStats:
    logs = np.concatenate([log_transform(p).ravel() for p in pressures])
    return NormStats(float(logs.mean()), float(logs.std()))


def split_sizes(n: int) -> tuple[int, int, int]:
    total = sum(SPLIT_WEIGHTS)
    n_train = round(n * SPLIT_WEIGHTS[0] / total)
    n_val = round(n * SPLIT_WEIGHTS[1] / total)
    return n_train, n_val, n - n_train - n_val


def assign_splits(n: int, base_seed: int) -> list[str]:
    if n < MIN_SAMPLES:
        raise DataError(f"need at least {MIN_SAMPLES} samples for three non-empty splits, got {n}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(base_seed), spawn_key=(1,))))
    order = rng.permutation(n)
    n_train, n_val, _ = split_sizes(n)
    tags = ["test"] * n
    for rank, idx in enumerate(order):
        if rank < n_train:
            tags[idx] = "train"
        elif rank < n_train + n_val:
            tags[idx] = "val"
    return tags


def make_sample(s: Scenario, g: GridSpec) -> Sample:
    inp = scene.build_model_input(s, g)
    return Sample(
        scenario=s,
        input=InputTensor(inp.values.astype(np.float32), inp.coords.astype(np.float32)),
        pressure=oracle_pressure(s, g).astype(np.float32),
    )


def generate_dataset(n: int, base_seed: int, g: GridSpec | None = None) -> Dataset:
    """``n`` oracle samples; sample i uses scenario seed ``base_seed + i``."""
    g = g or GridSpec()
    split = assign_splits(n, base_seed)
    samples = [make_sample(scene.sample_scenario(base_seed + i), g) for i in range(n)]
    norm = fit_norm([samples[i].pressure for i, t in enumerate(split) if t == "train"])
    return Dataset(samples=samples, grid=g, split=split, norm=norm, base_seed=int(base_seed))
