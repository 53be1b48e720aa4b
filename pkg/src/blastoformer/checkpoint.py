"""Checkpoint container.

Layout: b"BOFCKPT1" | u64 header length | JSON header | raw little-endian
tensors concatenated in header order.  The header records model kind and
config (with its SHA-256), grid, normalization stats, optimizer
hyperparameters and an optional UnscalerCNN.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data.dataset import NormStats
from .errors import BadMagicError, DataError, TruncatedPayloadError
from .model import UnscalerCNN, UnscalerConfig, config_hash
from .nn.optim import OptimizerState
from .registry import build_model
from .scene import GridSpec

MAGIC = b"BOFCKPT1"
_DTYPES = {torch.float32: "<f4", torch.float64: "<f8"}
_TORCH = {"<f4": torch.float32, "<f8": torch.float64}


@dataclass
class Checkpoint:
    kind: str
    model: nn.Module
    grid: GridSpec
    norm: NormStats
    optimizer: OptimizerState | None = None
    train_config: dict | None = None
    epoch: int = 0
    unscaler: UnscalerCNN | None = None

    @property
    def config(self) -> dict:
        return self.model.cfg.to_dict()


def _tensor_entries(ckpt: Checkpoint) -> list[tuple[str, torch.Tensor]]:
    entries = [(f"model.{k}", v) for k, v in ckpt.model.state_dict().items()]
    if ckpt.optimizer is not None:
        names = [n for n, _ in ckpt.model.named_parameters()]
        entries += [(f"adamw.m.{n}", m) for n, m in zip(names, ckpt.optimizer.m)]
        entries += [(f"adamw.v.{n}", v) for n, v in zip(names, ckpt.optimizer.v)]
    if ckpt.unscaler is not None:
        entries += [(f"unscaler.{k}", v) for k, v in ckpt.unscaler.state_dict().items()]
    return entries


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    entries = _tensor_entries(ckpt)
    cfg = ckpt.config
    header = {
        "kind": ckpt.kind,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "grid": ckpt.grid.to_dict(),
        "norm": ckpt.norm.to_dict(),
        "optimizer": ckpt.optimizer.hyperparameters() if ckpt.optimizer else None,
        "train_config": ckpt.train_config,
        "epoch": ckpt.epoch,
        "unscaler": ckpt.unscaler.cfg.to_dict() if ckpt.unscaler is not None else None,
        "tensors": [{"name": n, "shape": list(t.shape), "dtype": _DTYPES[t.dtype]} for n, t in entries],
    }
    hdr = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    blobs = [t.detach().cpu().contiguous().numpy().astype(_DTYPES[t.dtype], copy=False).tobytes()
             for _, t in entries]
    return MAGIC + struct.pack("<Q", len(hdr)) + hdr + b"".join(blobs)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(ckpt))


def load_checkpoint(path) -> Checkpoint:
    buf = Path(path).read_bytes()
    if buf[:8] != MAGIC:
        raise BadMagicError(f"{path}: not a checkpoint")
    if len(buf) < 16:
        raise TruncatedPayloadError(f"{path}: truncated header")
    (hlen,) = struct.unpack_from("<Q", buf, 8)
    header = json.loads(buf[16:16 + hlen])
    if config_hash(header["config"]) != header["config_hash"]:
        raise DataError(f"{path}: config hash mismatch")
    grid = GridSpec.from_dict(header["grid"])
    cfg = {k: v for k, v in header["config"].items() if k not in ("nx", "ny")}
    model = build_model(header["kind"], cfg, grid)
    if config_hash(model.cfg.to_dict()) != header["config_hash"]:
        raise DataError(f"{path}: stored config does not rebuild the same model")

    tensors = {}
    off = 16 + hlen
    for meta in header["tensors"]:
        dt = np.dtype(meta["dtype"])
        count = int(np.prod(meta["shape"])) if meta["shape"] else 1
        end = off + count * dt.itemsize
        if end > len(buf):
            raise TruncatedPayloadError(f"{path}: tensor {meta['name']} truncated")
        arr = np.frombuffer(buf, dtype=dt, count=count, offset=off).reshape(meta["shape"])
        tensors[meta["name"]] = torch.from_numpy(arr.copy())
        off = end
    if off != len(buf):
        raise DataError(f"{path}: trailing bytes after tensors")

    state = {k[len("model."):]: v for k, v in tensors.items() if k.startswith("model.")}
    model = model.to(next(iter(state.values())).dtype)
    model.load_state_dict(state)

    opt = None
    if header["optimizer"] is not None:
        names = [n for n, _ in model.named_parameters()]
        hyper = dict(header["optimizer"])
        opt = OptimizerState(m=[tensors[f"adamw.m.{n}"] for n in names],
                             v=[tensors[f"adamw.v.{n}"] for n in names], **hyper)
    unscaler = None
    if header["unscaler"] is not None:
        unscaler = UnscalerCNN(UnscalerConfig.from_dict(header["unscaler"]))
        ustate = {k[len("unscaler."):]: v for k, v in tensors.items() if k.startswith("unscaler.")}
        unscaler = unscaler.to(next(iter(ustate.values())).dtype)
        unscaler.load_state_dict(ustate)
    return Checkpoint(kind=header["kind"], model=model, grid=grid,
                      norm=NormStats.from_dict(header["norm"]), optimizer=opt,
                      train_config=header["train_config"], epoch=header["epoch"], unscaler=unscaler)
