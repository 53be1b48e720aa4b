from .evaluate import (MetricsReport, benchmark_inference, evaluate, format_comparison,
                       report_from_predictions)
from .metrics import error_map, metric_mae, metric_mape, metric_r2, per_sample_mape
from .render import histogram_csv, render_map
from .train import TRAIN_PRESETS, TrainConfig, train, train_unscaler

__all__ = [
    "MetricsReport", "benchmark_inference", "evaluate", "format_comparison", "report_from_predictions",
    "error_map", "metric_mae", "metric_mape", "metric_r2", "per_sample_mape",
    "histogram_csv", "render_map", "TRAIN_PRESETS", "TrainConfig", "train", "train_unscaler",
]
