"""Evaluation reports in the log and unscaled (Pa) domains, plus latency."""
from __future__ import annotations

import json
import math
import os
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from ..checkpoint import Checkpoint
from ..data.dataset import Dataset, log_transform, make_sample
from ..errors import DataError
from ..model import MIN_PRESSURE_PA
from ..registry import Batch, make_batch, run_model
from ..scene import Scenario
from .metrics import metric_mae, metric_mape, metric_r2, per_sample_mape
from .train import predict_batches

# Reference rows reported for comparison only (GPU timings, CFD dataset).
PUBLISHED_RESULTS = {
    "blastoformer": {"prediction_ms": 6.4, "params": 2.43e6,
                     "log": {"r2": 0.9169, "mae": 0.1729, "mape_pct": 1.315},
                     "unscaled": {"r2": 0.9516, "mae_kpa": 484.0, "mape_pct": 21.1}},
    "fno": {"prediction_ms": 4.0, "params": 3.65e5,
            "log": {"r2": 0.8231, "mae": 0.3359, "mape_pct": 2.579},
            "unscaled": {"r2": 0.9164, "mae_kpa": 600.0, "mape_pct": 35.9}},
    "cnn": {"prediction_ms": 1.4, "params": 2.96e6,
            "log": {"r2": 0.9218, "mae": 1.116, "mape_pct": 8.53},
            "unscaled": {"r2": 0.8945, "mae_kpa": 1192.0, "mape_pct": 211.0}},
}

TIMING_NOTE = ("inference_ms is the median single-sample CPU forward on one thread; "
               "the reference prediction_ms values were measured on a GPU and are not comparable")


@dataclass
class MetricsReport:
    model: str
    split: str
    n_samples: int
    r2_log: float
    mae_log: float
    mape_log_pct: float
    r2_unscaled: float
    mae_unscaled_pa: float
    mape_unscaled_pct: float
    per_sample_mape_log: list[float] = field(default_factory=list)
    per_sample_mape_unscaled: list[float] = field(default_factory=list)
    inference_ms: float = float("nan")
    param_count: int = 0
    unscaled_via: str = "exp"

    def to_dict(self) -> dict:
        d = asdict(self)
        if not math.isfinite(self.inference_ms):
            d["inference_ms"] = None
        d["r2_pooling"] = "pooled over all cells of all samples"
        d["published_reference"] = PUBLISHED_RESULTS.get(self.model)
        d["timing_note"] = TIMING_NOTE
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


def report_from_predictions(model: str, split: str, log_pred: np.ndarray, pressure_pred: np.ndarray,
                            pressure_true: np.ndarray, unscaled_via: str = "exp") -> MetricsReport:
    log_true = log_transform(pressure_true)
    return MetricsReport(
        model=model, split=split, n_samples=int(log_true.shape[0]),
        r2_log=metric_r2(log_pred, log_true),
        mae_log=metric_mae(log_pred, log_true),
        mape_log_pct=metric_mape(log_pred, log_true),
        r2_unscaled=metric_r2(pressure_pred, pressure_true),
        mae_unscaled_pa=metric_mae(pressure_pred, pressure_true),
        mape_unscaled_pct=metric_mape(pressure_pred, pressure_true),
        per_sample_mape_log=per_sample_mape(log_pred, log_true).tolist(),
        per_sample_mape_unscaled=per_sample_mape(pressure_pred, pressure_true).tolist(),
        unscaled_via=unscaled_via,
    )


@torch.no_grad()
def benchmark_inference(model, batch: Batch, runs: int = 100, warmup: int = 5) -> float:
    """Median wall-clock milliseconds of a single-sample forward on one thread."""
    if runs < 10:
        raise ValueError("benchmark needs at least 10 runs")
    single = Batch(batch.values[:1], batch.coords[:1], batch.cond[:1])
    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        for _ in range(warmup):
            run_model(model, single)
        times = []
        for _ in range(runs):
            t0 = time.perf_counter()
            run_model(model, single)
            times.append((time.perf_counter() - t0) * 1e3)
    finally:
        torch.set_num_threads(threads)
    return statistics.median(times)


def evaluate(ckpt: Checkpoint, dataset: Dataset, split: str = "test",
             bench_runs: int = 100, use_unscaler: bool = True) -> MetricsReport:
    samples = dataset.subset(split)
    if not samples:
        raise DataError(f"split {split!r} is empty")
    dtype = next(ckpt.model.parameters()).dtype
    batch = make_batch(samples, dtype)
    z = predict_batches(ckpt.model, batch).double()
    log_pred = z * ckpt.norm.log_std + ckpt.norm.log_mean
    if use_unscaler and ckpt.unscaler is not None:
        with torch.no_grad():
            p_pred = ckpt.unscaler(log_pred)
        via = "unscaler"
    else:
        p_pred = torch.exp(log_pred).clamp(min=MIN_PRESSURE_PA)
        via = "exp"
    truth = np.stack([s.pressure for s in samples]).astype(np.float64)
    report = report_from_predictions(ckpt.kind, split, log_pred.numpy(), p_pred.numpy(), truth, via)
    if bench_runs:
        report.inference_ms = benchmark_inference(ckpt.model, batch, runs=bench_runs)
    report.param_count = sum(p.numel() for p in ckpt.model.parameters())
    return report


@torch.no_grad()
def predict_pressure(ckpt: Checkpoint, scenario: Scenario) -> np.ndarray:
    """Predicted maximum-pressure field (Pa) for one scenario on the checkpoint's grid."""
    dtype = next(ckpt.model.parameters()).dtype
    batch = make_batch([make_sample(scenario, ckpt.grid)], dtype)
    log_pred = run_model(ckpt.model, batch).double() * ckpt.norm.log_std + ckpt.norm.log_mean
    if ckpt.unscaler is not None:
        p = ckpt.unscaler(log_pred)
    else:
        p = torch.exp(log_pred).clamp(min=MIN_PRESSURE_PA)
    return p[0].numpy()


def format_comparison(reports: list[MetricsReport]) -> str:
    """Text table laid out like the published comparison (model rows, log/unscaled sub-rows)."""
    lines = [f"{'Model':<14}{'R2':>9}{'MAE':>16}{'MAPE (%)':>11}{'time (ms)':>11}{'# Params':>12}",
             "-" * 73]
    for r in reports:
        lines.append(f"{r.model:<14}{'':>9}{'':>16}{'':>11}{r.inference_ms:>11.2f}{r.param_count:>12.3g}")
        lines.append(f"{'  log':<14}{r.r2_log:>9.4f}{r.mae_log:>16.4f}{r.mape_log_pct:>11.3f}")
        lines.append(f"{'  unscaled':<14}{r.r2_unscaled:>9.4f}"
                     f"{r.mae_unscaled_pa / 1e3:>12.1f} kPa{r.mape_unscaled_pct:>11.2f}")
        ref = PUBLISHED_RESULTS.get(r.model)
        if ref:
            lines.append(f"{'  (ref log)':<14}{ref['log']['r2']:>9.4f}{ref['log']['mae']:>16.4f}"
                         f"{ref['log']['mape_pct']:>11.3f}{ref['prediction_ms']:>11.2f}{ref['params']:>12.3g}")
            lines.append(f"{'  (ref unsc.)':<14}{ref['unscaled']['r2']:>9.4f}"
                         f"{ref['unscaled']['mae_kpa']:>12.1f} kPa{ref['unscaled']['mape_pct']:>11.2f}")
    return "\n".join(lines) + "\n"


def configure_threads() -> None:
    """Honour BOF_THREADS as the worker-thread cap."""
    n = os.environ.get("BOF_THREADS")
    if n:
        torch.set_num_threads(max(1, int(n)))
