"""Flat ``key = value`` run configuration files.

One file drives a whole run: model architecture, optimization schedule,
augmentation policy, flow estimation, dataset paths, and evaluation
smoothing.  Keys are dot-namespaced but the file is flat (no nesting),
so resolved configs written next to run outputs diff cleanly.  Unknown
keys are rejected rather than ignored.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .data import FlowParams
from .errors import ConfigError
from .imaging import AugmentPolicy
from .models import ModelConfig
from .training import TrainConfig


def _parse_bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(p) for p in text.split(","))


def _parse_opt_int(text: str):
    return None if text.lower() == "none" else int(text)


def _parse_opt_float(text: str):
    return None if text.lower() == "none" else float(text)


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (section attribute, field name, parser); section "" targets RunConfig itself
KEYS: dict[str, tuple[str, str, object]] = {
    "model.kind": ("model", "kind", str),
    "model.seq_len": ("model", "seq_len", int),
    "model.feature_dim": ("model", "feature_dim", int),
    "model.heads": ("model", "heads", int),
    "model.encoder_layers": ("model", "encoder_layers", int),
    "model.ff_dim": ("model", "ff_dim", int),
    "model.fused_dim": ("model", "fused_dim", int),
    "model.lstm_hidden": ("model", "lstm_hidden", int),
    "model.lstm_layers": ("model", "lstm_layers", int),
    "model.backbone_channels": ("model", "backbone_channels", _parse_int_tuple),
    "model.predict_speed": ("model", "predict_speed", _parse_bool),
    "model.positional_encoding": ("model", "positional_encoding", _parse_bool),
    "model.image_h": ("model", "image_h", int),
    "model.image_w": ("model", "image_w", int),
    "train.lr0": ("train", "lr0", float),
    "train.beta1": ("train", "beta1", float),
    "train.beta2": ("train", "beta2", float),
    "train.adam_eps": ("train", "adam_eps", float),
    "train.decay_epochs": ("train", "decay_epochs", _parse_int_tuple),
    "train.decay_factor": ("train", "decay_factor", float),
    "train.epochs": ("train", "epochs", int),
    "train.batch_size": ("train", "batch_size", int),
    "train.speed_loss_weight": ("train", "speed_loss_weight", float),
    "train.smooth_l1_beta": ("train", "smooth_l1_beta", float),
    "train.seed": ("train", "seed", int),
    "train.checkpoint_every": ("train", "checkpoint_every", int),
    "train.augment_enabled": ("train", "augment_enabled", _parse_bool),
    "augment.brightness_min": ("augment", "brightness_min", float),
    "augment.brightness_max": ("augment", "brightness_max", float),
    "augment.shadow_prob": ("augment", "shadow_prob", float),
    "augment.shadow_dim": ("augment", "shadow_dim", float),
    "augment.translate_px": ("augment", "translate_px", int),
    "augment.rotate_deg": ("augment", "rotate_deg", float),
    "augment.blur_kernel": ("augment", "blur_kernel", int),
    "augment.seed": ("augment", "seed", int),
    "augment.adjust_label": ("augment", "adjust_label", _parse_bool),
    "augment.angle_per_px": ("augment", "angle_per_px", float),
    "flow.levels": ("flow", "levels", int),
    "flow.iters": ("flow", "iters", int),
    "flow.alpha": ("flow", "alpha", float),
    "flow.mag_cap": ("", "flow_mag_cap", float),
    "flow.cache": ("", "flow_cache", _parse_bool),
    "data.index": ("", "data_index", str),
    "data.camera": ("", "camera", str),
    "data.train_frac": ("", "train_frac", float),
    "data.split_seed": ("", "split_seed", _parse_opt_int),
    "data.stride": ("", "stride", int),
    "eval.smooth": ("", "eval_smooth", _parse_opt_float),
    "out_dir": ("", "out_dir", str),
}


@dataclass
class RunConfig:
    model: ModelConfig
    train: TrainConfig
    augment: AugmentPolicy
    flow: FlowParams
    data_index: str = ""
    camera: str = "center"
    train_frac: float = 0.8
    split_seed: int | None = None
    stride: int = 1
    flow_mag_cap: float = 10.0
    flow_cache: bool = True
    eval_smooth: float | None = None
    out_dir: str = "runs/out"

    @classmethod
    def default(cls) -> "RunConfig":
        return cls(model=ModelConfig(), train=TrainConfig(),
                   augment=AugmentPolicy(), flow=FlowParams())

    def _get(self, key: str):
        section, field, _ = KEYS[key]
        if section == "":
            return getattr(self, field)
        if section == "augment" and field == "brightness_min":
            return self.augment.brightness_range[0]
        if section == "augment" and field == "brightness_max":
            return self.augment.brightness_range[1]
        return getattr(getattr(self, section), field)

    def dump(self) -> str:
        """Resolved configuration: every key, sorted, round-trippable."""
        return "".join(f"{key} = {_fmt(self._get(key))}\n" for key in sorted(KEYS))

    def save(self, path: str | os.PathLike) -> None:
        tmp = str(path) + ".tmp"
        with open(tmp, "w", encoding="ascii") as fh:
            fh.write(self.dump())
        os.replace(tmp, path)

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "RunConfig":
        sections: dict[str, dict] = {"model": {}, "train": {}, "augment": {}, "flow": {}, "": {}}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in KEYS:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            section, field, parser = KEYS[key]
            try:
                sections[section][field] = parser(value)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None

        aug = sections["augment"]
        lo = aug.pop("brightness_min", None)
        hi = aug.pop("brightness_max", None)
        if lo is not None or hi is not None:
            default = AugmentPolicy().brightness_range
            aug["brightness_range"] = (lo if lo is not None else default[0],
                                       hi if hi is not None else default[1])
        try:
            return cls(model=ModelConfig(**sections["model"]),
                       train=TrainConfig(**sections["train"]),
                       augment=AugmentPolicy(**aug),
                       flow=FlowParams(**sections["flow"]),
                       **sections[""])
        except Exception as exc:
            raise ConfigError(f"{source}: {exc}") from exc

    @classmethod
    def load(cls, path: str | os.PathLike) -> "RunConfig":
        try:
            with open(path, "r", encoding="ascii") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.parse(text, source=str(path))
