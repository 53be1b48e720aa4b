"""Binary sample/field files and the on-disk dataset layout.

sample_%05d.bin::

    b"BLSTSMP1" | u32 nx | u32 ny | u32 len | scenario JSON (UTF-8)
    | f32 input  (ny*nx*4, row-major, channel-last)
    | f32 coords (ny*nx*2)
    | f32 pressure (ny*nx)

All integers and floats little-endian.  A dataset directory holds those
files plus ``meta.json`` (grid, split tags, normalization stats, base seed).
"""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from ..errors import (BadMagicError, DataError, SampleFormatError, ShapeMismatchError,
                      TruncatedPayloadError)
from ..scene import GridSpec, InputTensor, Scenario
from .dataset import Dataset, NormStats, Sample

SAMPLE_MAGIC = b"BLSTSMP1"
FIELD_MAGIC = b"BLSTFLD1"
_F32 = np.dtype("<f4")


def sample_to_bytes(sample: Sample) -> bytes:
    ny, nx = sample.pressure.shape
    if sample.input.values.shape != (ny, nx, 4) or sample.input.coords.shape != (ny, nx, 2):
        raise ShapeMismatchError("sample arrays disagree on grid shape")
    js = sample.scenario.to_json().encode("utf-8")
    parts = [SAMPLE_MAGIC, struct.pack("<III", nx, ny, len(js)), js,
             np.ascontiguousarray(sample.input.values, dtype=_F32).tobytes(),
             np.ascontiguousarray(sample.input.coords, dtype=_F32).tobytes(),
             np.ascontiguousarray(sample.pressure, dtype=_F32).tobytes()]
    return b"".join(parts)


def sample_from_bytes(buf: bytes) -> Sample:
    if len(buf) < 8 or buf[:8] != SAMPLE_MAGIC:
        raise BadMagicError("not a sample file (bad magic)")
    if len(buf) < 20:
        raise TruncatedPayloadError("sample header truncated")
    nx, ny, js_len = struct.unpack_from("<III", buf, 8)
    off = 20
    if len(buf) < off + js_len:
        raise TruncatedPayloadError("scenario JSON truncated")
    try:
        scenario = Scenario.from_json(buf[off:off + js_len].decode("utf-8"))
    except (ValueError, KeyError, TypeError) as exc:
        raise SampleFormatError(f"malformed scenario JSON: {exc}") from exc
    off += js_len
    n = nx * ny
    need = 4 * n * (4 + 2 + 1)
    if len(buf) - off < need:
        raise TruncatedPayloadError(f"payload holds {len(buf) - off} bytes, header implies {need}")
    if len(buf) - off > need:
        raise ShapeMismatchError(f"payload holds {len(buf) - off} bytes, header implies {need}")
    flat = np.frombuffer(buf, dtype=_F32, count=7 * n, offset=off)
    values = flat[:4 * n].reshape(ny, nx, 4).astype(np.float32)
    coords = flat[4 * n:6 * n].reshape(ny, nx, 2).astype(np.float32)
    pressure = flat[6 * n:].reshape(ny, nx).astype(np.float32)
    return Sample(scenario, InputTensor(values, coords), pressure)


def write_sample(sample: Sample, path) -> None:
    Path(path).write_bytes(sample_to_bytes(sample))


def read_sample(path) -> Sample:
    return sample_from_bytes(Path(path).read_bytes())


def write_field(field: np.ndarray, path) -> None:
    field = np.asarray(field)
    if field.ndim != 2:
        raise DataError("a field is a 2-D (ny, nx) grid")
    ny, nx = field.shape
    Path(path).write_bytes(FIELD_MAGIC + struct.pack("<II", nx, ny)
                           + np.ascontiguousarray(field, dtype=_F32).tobytes())


def read_field(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if buf[:8] != FIELD_MAGIC:
        raise BadMagicError(f"{path}: not a field file")
    if len(buf) < 16:
        raise TruncatedPayloadError(f"{path}: header truncated")
    nx, ny = struct.unpack_from("<II", buf, 8)
    if len(buf) - 16 != 4 * nx * ny:
        raise TruncatedPayloadError(f"{path}: payload size disagrees with {ny}x{nx} header")
    return np.frombuffer(buf, dtype=_F32, offset=16).reshape(ny, nx).copy()


def save_dataset(ds: Dataset, directory) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for i, s in enumerate(ds.samples):
        write_sample(s, out / f"sample_{i:05d}.bin")
    meta = {
        "n": len(ds.samples),
        "base_seed": ds.base_seed,
        "grid": ds.grid.to_dict(),
        "split": ds.split,
        "norm": ds.norm.to_dict(),
    }
    tmp = out / "meta.json.tmp"
    tmp.write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    os.replace(tmp, out / "meta.json")


def load_dataset(directory) -> Dataset:
    root = Path(directory)
    try:
        meta = json.loads((root / "meta.json").read_text())
    except FileNotFoundError as exc:
        raise DataError(f"{root}: no meta.json") from exc
    grid = GridSpec.from_dict(meta["grid"])
    samples = [read_sample(root / f"sample_{i:05d}.bin") for i in range(meta["n"])]
    for s in samples:
        if s.pressure.shape != (grid.ny, grid.nx):
            raise ShapeMismatchError("sample grid disagrees with meta.json")
    return Dataset(samples=samples, grid=grid, split=list(meta["split"]),
                   norm=NormStats.from_dict(meta["norm"]), base_seed=int(meta["base_seed"]))
