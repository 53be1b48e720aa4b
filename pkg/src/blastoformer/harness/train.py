"""Training loop: AdamW + cosine schedule, L1 on normalized log-pressure,
best-validation checkpointing and patience-based early stopping."""
from __future__ import annotations

import copy
import csv
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import torch

from ..checkpoint import Checkpoint
from ..data.dataset import Dataset, log_transform, normalize
from ..errors import DataError, NumericError
from ..model import UnscalerCNN, UnscalerConfig
from ..nn.autodiff import backprop, zero_grad
from ..nn.optim import OptimizerState, adamw_step, cosine_lr
from ..registry import Batch, build_model, make_batch, run_model

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 4
    max_epochs: int = 10000
    early_stop_patience: int = 1000
    lr_min: float = 0.0
    weight_decay: float = 1e-2
    seed: int = 0
    loss: str = "L1"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.early_stop_patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")
        if self.loss not in ("L1", "MSE"):
            raise ValueError(f"unknown loss {self.loss!r}")

    def to_dict(self) -> dict:
        return asdict(self)


# Optimizer settings per model kind.
TRAIN_PRESETS = {
    "blastoformer": TrainConfig(lr=1e-4, batch_size=4, max_epochs=10000, early_stop_patience=1000),
    "cnn": TrainConfig(lr=1e-3, batch_size=32, max_epochs=10000, early_stop_patience=100),
    "fno": TrainConfig(lr=1e-4, batch_size=32, max_epochs=10000, early_stop_patience=100),
}


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


def _loss(pred: torch.Tensor, target: torch.Tensor, kind: str) -> torch.Tensor:
    diff = pred - target
    return diff.abs().mean() if kind == "L1" else (diff * diff).mean()


def split_tensors(ds: Dataset, split: str, dtype=torch.float32) -> tuple[Batch, torch.Tensor]:
    samples = ds.subset(split)
    if not samples:
        raise DataError(f"split {split!r} is empty")
    batch = make_batch(samples, dtype)
    target = np.stack([normalize(log_transform(s.pressure), ds.norm) for s in samples])
    return batch, torch.from_numpy(target).to(dtype)


def _take(batch: Batch, idx) -> Batch:
    return Batch(batch.values[idx], batch.coords[idx], batch.cond[idx])


@torch.no_grad()
def predict_batches(model, batch: Batch, chunk: int = 8) -> torch.Tensor:
    n = batch.values.shape[0]
    outs = [run_model(model, _take(batch, slice(i, i + chunk))) for i in range(0, n, chunk)]
    return torch.cat(outs)


def train(model_kind: str, dataset: Dataset, cfg: TrainConfig,
          model_config: dict | None = None, log_every: int = 50,
          dtype=torch.float32) -> tuple[Checkpoint, list[EpochRecord]]:
    x_tr, y_tr = split_tensors(dataset, "train", dtype)
    x_va, y_va = split_tensors(dataset, "val", dtype)
    model = build_model(model_kind, model_config, dataset.grid).to(dtype)
    params = list(model.parameters())
    state = OptimizerState.init(params, lr=cfg.lr, weight_decay=cfg.weight_decay)

    n_train = y_tr.shape[0]
    steps_per_epoch = math.ceil(n_train / cfg.batch_size)
    total_steps = cfg.max_epochs * steps_per_epoch
    rng = np.random.Generator(np.random.PCG64(cfg.seed))

    history: list[EpochRecord] = []
    best_val, best_epoch, since_best = math.inf, 0, 0
    best_model, best_opt = copy.deepcopy(model.state_dict()), copy.deepcopy(state)
    step = 0
    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        order = rng.permutation(n_train)
        running = 0.0
        for b in range(steps_per_epoch):
            idx = torch.from_numpy(order[b * cfg.batch_size:(b + 1) * cfg.batch_size])
            state.lr = cosine_lr(step, total_steps, cfg.lr, cfg.lr_min)
            zero_grad(params)
            loss = _loss(run_model(model, _take(x_tr, idx)), y_tr[idx], cfg.loss)
            if not torch.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}, step {step}")
            backprop(loss)
            adamw_step(params, state)
            running += loss.item() * len(idx)
            step += 1
        model.eval()
        val = _loss(predict_batches(model, x_va, cfg.batch_size), y_va, cfg.loss).item()
        if not math.isfinite(val):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")
        history.append(EpochRecord(epoch, running / n_train, val, state.lr))
        if val < best_val:
            best_val, best_epoch, since_best = val, epoch, 0
            best_model, best_opt = copy.deepcopy(model.state_dict()), copy.deepcopy(state)
        else:
            since_best += 1
        if log_every and epoch % log_every == 0:
            log.info("%s epoch %d train %.5f val %.5f (best %.5f @ %d) lr %.3g",
                     model_kind, epoch, running / n_train, val, best_val, best_epoch, state.lr)
        if since_best >= cfg.early_stop_patience:
            log.info("%s early stop at epoch %d (best %d)", model_kind, epoch, best_epoch)
            break

    model.load_state_dict(best_model)
    ckpt = Checkpoint(kind=model_kind, model=model, grid=dataset.grid, norm=dataset.norm,
                      optimizer=best_opt, train_config=cfg.to_dict(), epoch=best_epoch)
    return ckpt, history


def write_history(history: list[EpochRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss", "lr"])
        for r in history:
            w.writerow([r.epoch, repr(r.train_loss), repr(r.val_loss), repr(r.lr)])


# --------------------------------------------------------------- unscaler

PRESSURE_SCALE = 1e6  # MSE is taken on p / 1e6 to keep float32 losses moderate


@dataclass(frozen=True)
class UnscalerTrainConfig:
    lr: float = 1e-3
    batch_size: int = 16
    max_epochs: int = 200
    early_stop_patience: int = 50
    weight_decay: float = 0.0
    seed: int = 0


@torch.no_grad()
def log_predictions(ckpt: Checkpoint, batch: Batch) -> torch.Tensor:
    """Denormalized natural-log pressure predictions of the checkpoint's model."""
    z = predict_batches(ckpt.model, batch)
    return z * ckpt.norm.log_std + ckpt.norm.log_mean


def fit_unscaler(log_pred: torch.Tensor, pressure: torch.Tensor, cfg: UnscalerTrainConfig,
                 unscaler: UnscalerCNN, val: tuple[torch.Tensor, torch.Tensor] | None = None,
                 steps: int | None = None) -> tuple[UnscalerCNN, list[EpochRecord]]:
    """MSE fit of ``unscaler`` mapping log predictions to Pa.

    With ``steps`` set, run exactly that many full-batch steps (no selection).
    Otherwise run epochs and keep the weights with the lowest validation MAPE,
    starting from the initial (exp-equivalent) weights, so the result never
    does worse than plain exponentiation on the validation split.
    """
    params = list(unscaler.parameters())
    state = OptimizerState.init(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    target = pressure / PRESSURE_SCALE
    history: list[EpochRecord] = []

    def mse(lp, tgt):
        return ((unscaler(lp) / PRESSURE_SCALE - tgt) ** 2).mean()

    def val_mape():
        return ((unscaler(val[0]) - val[1]).abs() / val[1].abs()).mean().item()

    if steps is not None:
        for s in range(steps):
            state.lr = cosine_lr(s, steps, cfg.lr, 0.0)
            zero_grad(params)
            loss = mse(log_pred, target)
            backprop(loss)
            adamw_step(params, state)
        return unscaler, history

    n = log_pred.shape[0]
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total = cfg.max_epochs * steps_per_epoch
    step = 0
    with torch.no_grad():
        best_val = val_mape() if val is not None else math.inf
    best, since = copy.deepcopy(unscaler.state_dict()), 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        running = 0.0
        for b in range(steps_per_epoch):
            idx = torch.from_numpy(order[b * cfg.batch_size:(b + 1) * cfg.batch_size])
            state.lr = cosine_lr(step, total, cfg.lr, 0.0)
            zero_grad(params)
            loss = mse(log_pred[idx], target[idx])
            if not torch.isfinite(loss):
                raise NumericError("non-finite unscaler loss")
            backprop(loss)
            adamw_step(params, state)
            running += loss.item() * len(idx)
            step += 1
        if val is None:
            history.append(EpochRecord(epoch, running / n, math.nan, state.lr))
            continue
        with torch.no_grad():
            v = val_mape()
        history.append(EpochRecord(epoch, running / n, v, state.lr))
        if v < best_val:
            best_val, best, since = v, copy.deepcopy(unscaler.state_dict()), 0
        else:
            since += 1
            if since >= cfg.early_stop_patience:
                break
    if val is not None:
        unscaler.load_state_dict(best)
    return unscaler, history


def train_unscaler(ckpt: Checkpoint, dataset: Dataset,
                   cfg: UnscalerTrainConfig | None = None) -> tuple[UnscalerCNN, list[EpochRecord]]:
    """Fit an UnscalerCNN post hoc on the frozen model's train-split log predictions."""
    cfg = cfg or UnscalerTrainConfig()
    dtype = next(ckpt.model.parameters()).dtype
    x_tr, _ = split_tensors(dataset, "train", dtype)
    x_va, _ = split_tensors(dataset, "val", dtype)
    p_tr = torch.from_numpy(np.stack([s.pressure for s in dataset.subset("train")])).to(dtype)
    p_va = torch.from_numpy(np.stack([s.pressure for s in dataset.subset("val")])).to(dtype)
    unscaler = UnscalerCNN(UnscalerConfig(log_mean=ckpt.norm.log_mean, log_std=ckpt.norm.log_std,
                                          model_seed=cfg.seed)).to(dtype)
    return fit_unscaler(log_predictions(ckpt, x_tr), p_tr, cfg, unscaler,
                        val=(log_predictions(ckpt, x_va), p_va))


def with_overrides(cfg: TrainConfig, **kw) -> TrainConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})


def history_path_for(checkpoint_path) -> Path:
    p = Path(checkpoint_path)
    return p.with_name(p.stem + "_history.csv")
