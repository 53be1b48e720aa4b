"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
``BOF_THREADS`` caps the torch worker-thread count.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .data import emit_case, generate_dataset, load_dataset, parse_probe_file, save_dataset
from .data.dataset import make_sample
from .data.io import read_field, write_field
from .errors import DataError, NumericError
from .harness.evaluate import (TIMING_NOTE, benchmark_inference, configure_threads, evaluate,
                               predict_pressure)
from .harness.render import COLORMAPS, render_map
from .harness.train import (TRAIN_PRESETS, TrainConfig, UnscalerTrainConfig, history_path_for,
                            train, train_unscaler, write_history)
from .registry import MODEL_KINDS, make_batch
from .scene import GridSpec, Scenario, sample_scenario

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _grid(side: int) -> GridSpec:
    if side < 2:
        raise UsageError("--grid-side must be at least 2")
    return GridSpec.square(side)


def cmd_gen_data(a) -> None:
    ds = generate_dataset(a.n, a.seed, _grid(a.grid_side))
    save_dataset(ds, a.out)
    print(f"wrote {a.n} samples to {a.out}")


def cmd_gen_cases(a) -> None:
    g = _grid(a.grid_side)
    root = Path(a.out)
    for i in range(a.n):
        emit_case(sample_scenario(a.seed + i), root / f"case_{i:05d}", g)
    print(f"wrote {a.n} cases to {root}")


def cmd_parse_probes(a) -> None:
    field = parse_probe_file(Path(a.file).read_text(), _grid(a.grid_side))
    write_field(field, a.out)
    print(f"wrote {field.shape[0]}x{field.shape[1]} maximum-pressure field to {a.out}")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"--config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict) or set(cfg) - {"model", "train", "unscaler"}:
        raise UsageError('--config must be an object with keys among "model", "train", "unscaler"')
    return cfg


def cmd_train(a) -> None:
    cfg = _load_config(a.config)
    try:
        tcfg = TrainConfig(**{**TRAIN_PRESETS[a.model].to_dict(), **cfg.get("train", {})})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad train config: {exc}") from exc
    ds = load_dataset(a.data)
    try:
        ckpt, history = train(a.model, ds, tcfg, cfg.get("model"))
    except TypeError as exc:
        raise UsageError(f"bad model config: {exc}") from exc
    unscaler_cfg = cfg.get("unscaler")
    if unscaler_cfg is not None:
        try:
            ucfg = UnscalerTrainConfig(**(unscaler_cfg if isinstance(unscaler_cfg, dict) else {}))
        except TypeError as exc:
            raise UsageError(f"bad unscaler config: {exc}") from exc
        ckpt.unscaler, _ = train_unscaler(ckpt, ds, ucfg)
    save_checkpoint(ckpt, a.out)
    write_history(history, history_path_for(a.out))
    print(f"best epoch {ckpt.epoch}; checkpoint {a.out}")


def cmd_eval(a) -> None:
    ckpt = load_checkpoint(a.checkpoint)
    report = evaluate(ckpt, load_dataset(a.data), a.split, bench_runs=a.bench_runs)
    Path(a.report).write_text(report.to_json())
    print(f"{ckpt.kind} {a.split}: log R2 {report.r2_log:.4f}, unscaled R2 {report.r2_unscaled:.4f}")


def cmd_predict(a) -> None:
    ckpt = load_checkpoint(a.checkpoint)
    try:
        scenario = Scenario.from_json(Path(a.scenario).read_text())
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{a.scenario}: malformed scenario: {exc}") from exc
    field = predict_pressure(ckpt, scenario)
    if a.out_field:
        write_field(field, a.out_field)
    if a.out_image:
        render_map(field, "jet", a.out_image)
    print(f"peak predicted pressure {field.max():.6g} Pa")


def cmd_plot(a) -> None:
    render_map(read_field(a.field), a.colormap, a.out)


def cmd_bench(a) -> None:
    if a.runs < 10:
        raise UsageError("--runs must be at least 10")
    ckpt = load_checkpoint(a.checkpoint)
    dtype = next(ckpt.model.parameters()).dtype
    batch = make_batch([make_sample(sample_scenario(0), ckpt.grid)], dtype)
    ms = benchmark_inference(ckpt.model, batch, runs=a.runs)
    print(json.dumps({"model": ckpt.kind, "median_ms": ms, "runs": a.runs, "note": TIMING_NOTE}))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blastoformer", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-data", help="generate an oracle-labelled dataset")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--grid-side", type=int, default=99)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("gen-cases", help="emit solver case directories")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--grid-side", type=int, default=99)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_cases)

    s = sub.add_parser("parse-probes", help="reduce a probe file to a maximum-pressure field")
    s.add_argument("--file", required=True)
    s.add_argument("--grid-side", type=int, default=99)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_parse_probes)

    s = sub.add_parser("train", help="train a model")
    s.add_argument("--model", choices=MODEL_KINDS, required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--config", help='JSON file: {"model": {...}, "train": {...}, "unscaler": {...}}')
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--split", choices=("train", "val", "test"), default="test")
    s.add_argument("--report", required=True)
    s.add_argument("--bench-runs", type=int, default=0,
                   help="latency runs to include in the report (0 keeps the report reproducible)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("predict", help="predict the pressure field of one scenario")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--out-field")
    s.add_argument("--out-image")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("plot", help="render a field file as a PPM image")
    s.add_argument("--field", required=True)
    s.add_argument("--colormap", choices=COLORMAPS, default="jet")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("bench", help="single-sample CPU latency of a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--runs", type=int, default=100)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    configure_threads()
    try:
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
