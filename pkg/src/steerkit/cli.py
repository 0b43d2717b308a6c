"""Command-line pipeline: synth, train, evaluate, flow, augment.

Exit codes: 0 success, 2 usage/config problem, 3 numeric failure during
training, 4 checkpoint/config mismatch.  Every command is reproducible
byte for byte given identical inputs and seeds; run outputs always
include the resolved configuration.  ``STEERKIT_OUT_DIR`` overrides the
configured output directory.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .data import load_index, make_sequences, parse_track, split
from .data.synthetic import generate_synthetic
from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    DimensionError,
    NumericsError,
    ParseError,
    SteerkitError,
)
from .evaluation import emit_plot_data, evaluate, exp_smooth, export_attention, rmse
from .imaging import AugmentPolicy, augment, compute_dense_flow, encode_flow_hsv, read_ppm, write_ppm
from .models import build_model, load_checkpoint
from .runconfig import RunConfig
from .training import train

OUT_DIR_ENV = "STEERKIT_OUT_DIR"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steerkit",
                                     description="Steering-angle prediction pipeline")
    parser.add_argument("--version", action="version", version=f"steerkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic road clip with exact labels")
    p.add_argument("--track", required=True,
                   help="preset name (straight/left/right/slalom/mixed/mixed2) or 'curv@len,...'")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--fps", type=float, default=20.0)

    p = sub.add_parser("train", help="train a model from a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--model", default=None,
                   help="override model.kind (e.g. simple_transformer for the ablation)")
    p.add_argument("--out", default=None, help="override the configured output directory")

    p = sub.add_parser("evaluate", help="evaluate a checkpoint; prints 'split rmse [smoothed]'")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--smooth", type=float, default=None)
    p.add_argument("--split", choices=("train", "val", "all"), default="val")
    p.add_argument("--out", default=None)

    p = sub.add_parser("flow", help="dense optical flow between two PPMs, rendered as HSV")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mag-cap", type=float, default=10.0)

    p = sub.add_parser("augment", help="apply one seeded augmentation draw to a PPM")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    return parser


def _resolve_out_dir(cfg: RunConfig, flag_value: str | None) -> str:
    if flag_value:
        return flag_value
    env = os.environ.get(OUT_DIR_ENV)
    return env if env else cfg.out_dir


def _load_sequences(cfg: RunConfig, model):
    index = load_index(cfg.data_index, camera_filter=cfg.camera)
    train_idx, val_idx = split(index, cfg.train_frac, cfg.split_seed)
    kwargs = dict(seq_len=cfg.model.seq_len, stride=cfg.stride, flow_params=cfg.flow,
                  use_cache=cfg.flow_cache, with_flow=model.wants_flow)
    return make_sequences(train_idx, **kwargs), make_sequences(val_idx, **kwargs), index, kwargs


def _cmd_synth(args) -> int:
    track = parse_track(args.track, image_h=args.height, image_w=args.width, seed=args.seed)
    csv = generate_synthetic(track, args.frames, args.out, fps=args.fps)
    print(f"wrote {args.frames} frames and {csv}")
    return 0


def _cmd_train(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.model:
        fields = {k: getattr(cfg.model, k) for k in
                  ("seq_len", "feature_dim", "heads", "encoder_layers", "ff_dim", "fused_dim",
                   "lstm_hidden", "lstm_layers", "backbone_channels", "positional_encoding",
                   "image_h", "image_w")}
        predict_speed = cfg.model.predict_speed and args.model == "dual_transformer"
        cfg.model = type(cfg.model)(kind=args.model, predict_speed=predict_speed, **fields)
    if not cfg.data_index:
        raise ConfigError("data.index is not set in the config")
    if not os.path.exists(cfg.data_index):
        raise ConfigError(f"dataset index not found: {cfg.data_index}")

    out_dir = _resolve_out_dir(cfg, args.out)
    os.makedirs(out_dir, exist_ok=True)
    model = build_model(cfg.model, seed=cfg.train.seed)
    train_set, val_set, _, _ = _load_sequences(cfg, model)

    cfg.out_dir = out_dir
    cfg.save(os.path.join(out_dir, "config.txt"))
    metrics = train(model, train_set, cfg.train, out_dir=out_dir, val_set=val_set,
                    policy=cfg.augment, flow_mag_cap=cfg.flow_mag_cap)

    from .report import save_training_curves
    save_training_curves(metrics, os.path.join(out_dir, "loss_curve.png"))
    final = metrics[-1]
    print(f"trained {cfg.model.kind} for {final['epoch'] + 1} epochs, "
          f"final train angle loss {final['loss_angle']:.6f}")
    print(f"artifacts in {out_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = RunConfig.load(args.config)
    model = build_model(cfg.model, seed=cfg.train.seed)
    arrays, digest = load_checkpoint(args.checkpoint)
    if digest != cfg.model.digest():
        raise CheckpointError(
            f"checkpoint {args.checkpoint} was written by a different model config")
    model.load_state(arrays)

    train_set, val_set, index, seq_kwargs = _load_sequences(cfg, model)
    if args.split == "train":
        samples = train_set
    elif args.split == "val":
        samples = val_set
    else:
        samples = make_sequences(index, **seq_kwargs)
    series, value = evaluate(model, samples, flow_mag_cap=cfg.flow_mag_cap)

    factor = args.smooth if args.smooth is not None else cfg.eval_smooth
    smoothed = None
    if factor is not None:
        smoothed = exp_smooth(series.predictions, factor)
        print(f"{args.split} {value!r} {rmse(smoothed, series.targets)!r}")
    else:
        print(f"{args.split} {value!r}")

    out_dir = _resolve_out_dir(cfg, args.out)
    os.makedirs(out_dir, exist_ok=True)
    emit_plot_data(series, os.path.join(out_dir, "predictions.csv"))
    from .report import save_attention_figure, save_prediction_figure
    save_prediction_figure(series, os.path.join(out_dir, "predictions.png"), smoothed)
    first = model.forward(*_first_sample_tensors(model, samples, cfg.flow_mag_cap))
    if first.attention is not None:
        export_attention(first, out_dir)
        save_attention_figure(first, os.path.join(out_dir, "attention.png"))
    return 0


def _first_sample_tensors(model, samples, mag_cap):
    from .training import prepare_batch
    rgb, flow, _, _ = prepare_batch([samples[0]], model, None, None, mag_cap)
    return (rgb, flow) if model.wants_flow else (rgb,)


def _cmd_flow(args) -> int:
    a = read_ppm(args.a)
    b = read_ppm(args.b)
    flow = compute_dense_flow(a, b)
    write_ppm(encode_flow_hsv(flow, args.mag_cap), args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_augment(args) -> int:
    frame = read_ppm(args.input)
    policy = AugmentPolicy(seed=args.seed)
    out, _ = augment(frame, 0.0, policy, np.random.default_rng(args.seed))
    write_ppm(out, args.out)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "flow": _cmd_flow,
    "augment": _cmd_augment,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NumericsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ConfigError, ContractError, ParseError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SteerkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
