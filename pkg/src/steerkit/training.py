"""Losses, Adam with bias correction, step decay, and the epoch loop.

The training objective is root-mean-square error on the angle; models
with a speed head add a Smooth-L1 speed term scaled by
``speed_loss_weight``.  RMSE is reduced per batch, and its gradient at
an exactly perfect batch is defined as zero so training never NaNs on
memorized data.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NumericsError
from .imaging import AugmentPolicy, Frame, augment, encode_flow_hsv, resize_bilinear
from .models import ModelOutput, save_checkpoint
from .tensor import Tensor, no_grad


@dataclass
class TrainConfig:
    lr0: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    decay_epochs: tuple[int, ...] = (30, 90, 150)
    decay_factor: float = 10.0
    epochs: int = 160
    batch_size: int = 16
    speed_loss_weight: float = 0.1
    smooth_l1_beta: float = 1.0
    seed: int = 0
    checkpoint_every: int = 0  # additionally checkpoint every N epochs; 0 = final only
    augment_enabled: bool = True

    def __post_init__(self):
        self.decay_epochs = tuple(int(e) for e in self.decay_epochs)
        if list(self.decay_epochs) != sorted(set(self.decay_epochs)):
            raise ContractError(f"decay_epochs must be strictly increasing, got {self.decay_epochs}")
        if any(e >= self.epochs for e in self.decay_epochs):
            raise ContractError(f"decay_epochs {self.decay_epochs} must all be < epochs {self.epochs}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ContractError("epochs and batch_size must be >= 1")
        if self.speed_loss_weight < 0:
            raise ContractError(f"speed_loss_weight must be >= 0, got {self.speed_loss_weight}")
        if self.smooth_l1_beta <= 0:
            raise ContractError(f"smooth_l1_beta must be > 0, got {self.smooth_l1_beta}")


def _flat(values) -> Tensor:
    t = values if isinstance(values, Tensor) else Tensor(np.asarray(values, dtype=np.float64))
    return t.reshape(-1)


def rmse_loss(pred, target) -> Tensor:
    """sqrt(mean((pred - target)^2)); gradient at zero residual is 0."""
    p, t = _flat(pred), _flat(target)
    if p.shape != t.shape or p.size < 1:
        raise ContractError(f"rmse_loss needs equal nonempty lengths, got {p.shape} vs {t.shape}")
    d = p - t
    mse = (d * d).mean()
    if mse.data == 0.0:
        return mse * 0.0
    return mse.sqrt()


def smooth_l1_loss(pred, target, beta: float = 1.0) -> Tensor:
    """Mean Smooth-L1: quadratic inside |d| < beta, linear outside.

    Value and slope agree at the knee (0.5*beta and 1), so the loss is
    C1 everywhere.
    """
    if beta <= 0:
        raise ContractError(f"beta must be > 0, got {beta}")
    p, t = _flat(pred), _flat(target)
    if p.shape != t.shape or p.size < 1:
        raise ContractError(f"smooth_l1_loss needs equal nonempty lengths, got {p.shape} vs {t.shape}")
    d = (p - t).abs()
    quad_side = (d.data < beta).astype(np.float64)
    quad = d * d * (0.5 / beta)
    lin = d - 0.5 * beta
    return (quad * quad_side + lin * (1.0 - quad_side)).mean()


def combined_loss(output: ModelOutput, angle_target, speed_target=None,
                  speed_weight: float = 0.1, beta: float = 1.0) -> tuple[Tensor, Tensor, Tensor | None]:
    """Total, angle, and speed loss terms: total = angle + weight * speed.

    The speed term exists only when the model produced speed predictions;
    providing those without labels while the weight is positive is an error.
    """
    loss_angle = rmse_loss(output.angle, angle_target)
    if output.speed is None or speed_weight == 0.0:
        return loss_angle, loss_angle, None
    if speed_target is None:
        raise ContractError("model predicts speed but no speed labels were provided")
    loss_speed = smooth_l1_loss(output.speed, speed_target, beta)
    return loss_angle + loss_speed * speed_weight, loss_angle, loss_speed


class Adam:
    """Bias-corrected Adam over a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self, lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Step-decayed learning rate: lr0 / factor^(decays passed by ``epoch``)."""
    if not (0 <= epoch < cfg.epochs):
        raise ContractError(f"epoch {epoch} outside [0, {cfg.epochs})")
    drops = sum(1 for d in cfg.decay_epochs if epoch >= d)
    return cfg.lr0 / (cfg.decay_factor ** drops)


def _frame_to_chw(frame: Frame, out_h: int, out_w: int) -> np.ndarray:
    if frame.height != out_h or frame.width != out_w:
        frame = resize_bilinear(frame, out_h, out_w)
    return frame.pixels.transpose(2, 0, 1)


def prepare_batch(samples, model, policy: AugmentPolicy | None = None,
                  sample_rngs=None, flow_mag_cap: float = 10.0):
    """Assemble sequence samples into model-shaped tensors.

    Augmentation, when given, draws once per sample: every frame of a
    window is transformed identically (a fresh generator with the same
    seed per frame), preserving temporal consistency.  Flow images are
    rendered from the cached fields and are not augmented.
    """
    cfg = model.config
    h, w = cfg.image_h, cfg.image_w
    rgb, flow, angles, speeds = [], [], [], []
    for si, sample in enumerate(samples):
        frames = sample.frames
        labels = np.asarray(sample.angles, dtype=np.float64).copy()
        if policy is not None:
            seed = sample_rngs[si] if sample_rngs is not None else policy.seed
            aug_frames = []
            for t, fr in enumerate(frames):
                out, labels[t] = augment(fr, labels[t], policy, np.random.default_rng(seed))
                aug_frames.append(out)
            frames = aug_frames
        rgb.append(np.stack([_frame_to_chw(fr, h, w) for fr in frames]))
        angles.append(labels)
        speeds.append(np.asarray(sample.speeds, dtype=np.float64))
        if model.wants_flow:
            rendered = [encode_flow_hsv(fl, flow_mag_cap) for fl in sample.flows]
            flow.append(np.stack([_frame_to_chw(fr, h, w) for fr in rendered]))
    rgb_t = Tensor(np.stack(rgb))
    flow_t = Tensor(np.stack(flow)) if model.wants_flow else None
    return rgb_t, flow_t, np.stack(angles), np.stack(speeds)


def train(model, train_set, cfg: TrainConfig, out_dir: str | os.PathLike | None = None,
          val_set=None, policy: AugmentPolicy | None = None, flow_mag_cap: float = 10.0,
          callbacks=()) -> list[dict]:
    """Run the seeded epoch loop; returns the per-epoch metrics rows.

    Shuffles with a generator derived from ``cfg.seed``, augments the
    train split only, aborts on a non-finite loss, and (with ``out_dir``)
    writes ``metrics.csv`` plus checkpoints.  Two runs with identical
    inputs and seeds produce byte-identical artifacts.
    """
    if len(train_set) == 0:
        raise ContractError("training dataset is empty")
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    params = model.parameters()
    opt = Adam(params, cfg.beta1, cfg.beta2, cfg.adam_eps)
    shuffle_rng = np.random.default_rng(cfg.seed)
    use_policy = policy if cfg.augment_enabled else None
    speed_weight = cfg.speed_loss_weight if getattr(model.config, "predict_speed", False) else 0.0

    metrics: list[dict] = []
    stop = False
    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        order = shuffle_rng.permutation(len(train_set))
        sum_angle = sum_speed = 0.0
        n_seen = 0
        has_speed = False
        for start in range(0, len(order), cfg.batch_size):
            chunk = order[start:start + cfg.batch_size]
            samples = [train_set[int(i)] for i in chunk]
            rngs = [[cfg.seed, epoch, int(i)] for i in chunk]
            rgb, flow, angles, speeds = prepare_batch(samples, model, use_policy, rngs, flow_mag_cap)
            output = model.forward(rgb, flow)
            total, loss_angle, loss_speed = combined_loss(
                output, angles, speeds, speed_weight, cfg.smooth_l1_beta)
            if not np.isfinite(total.data):
                raise NumericsError(f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}")
            opt.zero_grad()
            total.backward()
            opt.step(lr)
            sum_angle += loss_angle.item() * len(chunk)
            if loss_speed is not None:
                has_speed = True
                sum_speed += loss_speed.item() * len(chunk)
            n_seen += len(chunk)

        row = {"epoch": epoch, "split": "train", "loss_angle": sum_angle / n_seen,
               "loss_speed": (sum_speed / n_seen) if has_speed else None, "lr": lr}
        metrics.append(row)
        if val_set is not None and len(val_set) > 0:
            metrics.append(_validation_row(model, val_set, cfg, epoch, lr, speed_weight, flow_mag_cap))
        for cb in callbacks:
            if cb(epoch, row):
                stop = True
        if out_dir is not None and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(os.path.join(out_dir, f"checkpoint_ep{epoch + 1}.bin"),
                            model.state(), model.config.digest())
        if stop:
            break

    if out_dir is not None:
        write_metrics_csv(os.path.join(out_dir, "metrics.csv"), metrics)
        save_checkpoint(os.path.join(out_dir, "checkpoint.bin"), model.state(), model.config.digest())
    return metrics


def _validation_row(model, val_set, cfg, epoch, lr, speed_weight, flow_mag_cap) -> dict:
    sum_angle = sum_speed = 0.0
    n_seen = 0
    has_speed = False
    with no_grad():
        for start in range(0, len(val_set), cfg.batch_size):
            samples = [val_set[i] for i in range(start, min(start + cfg.batch_size, len(val_set)))]
            rgb, flow, angles, speeds = prepare_batch(samples, model, None, None, flow_mag_cap)
            output = model.forward(rgb, flow)
            _, loss_angle, loss_speed = combined_loss(output, angles, speeds, speed_weight, cfg.smooth_l1_beta)
            sum_angle += loss_angle.item() * len(samples)
            if loss_speed is not None:
                has_speed = True
                sum_speed += loss_speed.item() * len(samples)
            n_seen += len(samples)
    return {"epoch": epoch, "split": "val", "loss_angle": sum_angle / n_seen,
            "loss_speed": (sum_speed / n_seen) if has_speed else None, "lr": lr}


def write_metrics_csv(path: str | os.PathLike, rows: list[dict]) -> None:
    lines = ["epoch,split,loss_angle,loss_speed,lr"]
    for r in rows:
        speed = "" if r["loss_speed"] is None else repr(r["loss_speed"])
        lines.append(f"{r['epoch']},{r['split']},{r['loss_angle']!r},{speed},{r['lr']!r}")
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
