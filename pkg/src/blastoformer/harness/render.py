"""PPM heat maps and CSV histograms."""
from __future__ import annotations

from pathlib import Path

import numpy as np

# Blue -> cyan -> yellow -> red in four equal linear segments.
_JET_ANCHORS = np.array([
    [0.0, 0.0, 1.0],
    [0.0, 0.5, 1.0],
    [0.0, 1.0, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.0, 0.0],
])
COLORMAPS = ("jet", "binary")


def jet(t: np.ndarray) -> np.ndarray:
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    knots = np.linspace(0.0, 1.0, len(_JET_ANCHORS))
    return np.stack([np.interp(t, knots, _JET_ANCHORS[:, c]) for c in range(3)], axis=-1)


def binary(t: np.ndarray) -> np.ndarray:
    """White at 0, black at 1."""
    g = 1.0 - np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    return np.stack([g, g, g], axis=-1)


def to_rgb8(field: np.ndarray, colormap: str = "jet") -> np.ndarray:
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ValueError("render expects a 2-D field")
    if np.isnan(field).any():
        raise ValueError("field contains NaN cells")
    lo, hi = field.min(), field.max()
    t = (field - lo) / (hi - lo) if hi > lo else np.zeros_like(field)
    cmap = {"jet": jet, "binary": binary}.get(colormap)
    if cmap is None:
        raise ValueError(f"unknown colormap {colormap!r}")
    return np.floor(cmap(t) * 255.0 + 0.5).astype(np.uint8)


def ppm_bytes(field: np.ndarray, colormap: str = "jet") -> bytes:
    """Binary P6 image, one pixel per cell, first image row = first grid row."""
    rgb = to_rgb8(field, colormap)
    ny, nx = rgb.shape[:2]
    return f"P6\n{nx} {ny}\n255\n".encode("ascii") + rgb.tobytes()


def render_map(field: np.ndarray, colormap: str, path) -> None:
    Path(path).write_bytes(ppm_bytes(field, colormap))


def histogram_rows(values, bins: int) -> list[tuple[float, float, int]]:
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("histogram of an empty vector")
    if bins < 1:
        raise ValueError("need at least one bin")
    top = float(values.max())
    if top <= 0.0:
        return [(0.0, 0.0, int(values.size))] + [(0.0, 0.0, 0)] * (bins - 1)
    edges = np.linspace(0.0, top, bins + 1)
    idx = np.minimum((values / top * bins).astype(np.int64), bins - 1)
    counts = np.bincount(np.clip(idx, 0, bins - 1), minlength=bins)
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


def histogram_csv(values, bins: int, path) -> None:
    rows = histogram_rows(values, bins)
    lines = ["bin_left,bin_right,count"] + [f"{a!r},{b!r},{c}" for a, b, c in rows]
    Path(path).write_text("\n".join(lines) + "\n")
