"""Pooled regression metrics over batches of fields."""
from __future__ import annotations

import numpy as np


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    return pred, truth


def metric_r2(pred, truth) -> float:
    """1 - SS_res / SS_tot, pooled over every cell of every sample."""
    pred, truth = _pair(pred, truth)
    ss_tot = np.sum((truth - truth.mean()) ** 2)
    if ss_tot == 0.0:
        raise ValueError("R^2 undefined for constant truth")
    return float(1.0 - np.sum((pred - truth) ** 2) / ss_tot)


def metric_mae(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def metric_mape(pred, truth) -> float:
    """Mean absolute percentage error in percent."""
    pred, truth = _pair(pred, truth)
    if np.any(truth == 0.0):
        raise ValueError("MAPE undefined where truth is zero")
    return float(np.mean(np.abs(pred - truth) / np.abs(truth)) * 100.0)


def per_sample_mape(pred, truth) -> np.ndarray:
    """MAPE of each sample along the leading axis."""
    pred, truth = _pair(pred, truth)
    if np.any(truth == 0.0):
        raise ValueError("MAPE undefined where truth is zero")
    rel = np.abs(pred - truth) / np.abs(truth)
    return rel.reshape(rel.shape[0], -1).mean(axis=1) * 100.0


def error_map(pred, truth) -> np.ndarray:
    pred, truth = _pair(pred, truth)
    return np.abs(pred - truth)
