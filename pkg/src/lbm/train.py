"""Bridge-matching losses and the training loop.

Total objective per batch::

    L = mean || v_theta(z_t, t, c) - (z1 - z_t) / (1 - t) ||^2
        + lambda * pixel(decode((1 - t) v_theta + z_t), x1)

The pixel term is L1 or L2, evaluated on one random square crop (shared
by the whole batch) once the image side exceeds ``crop_threshold``.
Its gradient flows through the fixed decoder only.
"""

from __future__ import annotations

import csv
import logging
import os
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from lbm.bridge import BridgeSample, make_bridge_sample, predict_target
from lbm.codec import Codec, decode, decode_adjoint, encode
from lbm.core import RngStream, gaussian_noise
from lbm.errors import ConfigError, DivergenceError, ScheduleError, ShapeError
from lbm.model import DriftModel, backward_cached, forward_cached
from lbm.optim import make_optimizer
from lbm.schedule import TimestepDistribution, sample_t

logger = logging.getLogger(__name__)

PIXEL_KINDS = ("none", "l1", "l2")
DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class CropPolicy:
    threshold: int = 8
    size: int = 8

    def __post_init__(self):
        if self.size < 1 or self.size > self.threshold:
            raise ConfigError(f"crop size {self.size} must be in [1, threshold={self.threshold}]")


@dataclass
class TrainConfig:
    sigma: float = 0.05
    lam: float = 0.0
    pixel_loss: str = "none"
    crop: CropPolicy = field(default_factory=CropPolicy)
    timesteps: TimestepDistribution = field(default_factory=lambda: TimestepDistribution.discrete(4))
    optimizer: str = "adamw"
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.01
    iterations: int = 5000
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.pixel_loss not in PIXEL_KINDS:
            raise ConfigError(f"pixel loss must be one of {PIXEL_KINDS}, got {self.pixel_loss!r}")
        if self.lam > 0 and self.pixel_loss == "none":
            raise ConfigError("lambda > 0 needs a pixel loss kind (l1 or l2)")
        if self.iterations < 0 or self.batch_size < 1:
            raise ConfigError("iterations must be >= 0 and batch size >= 1")


@dataclass
class TrainReport:
    bridge: np.ndarray
    pixel: np.ndarray
    total: np.ndarray
    wall_clock: float
    model: DriftModel
    timesteps_seen: set = field(default_factory=set)


class Loss(NamedTuple):
    total: float
    grad: np.ndarray
    bridge: float
    pixel: float


# --- crops -----------------------------------------------------------------


def needs_crop(image_shape, policy: CropPolicy) -> bool:
    return len(image_shape) == 4 and max(image_shape[2], image_shape[3]) > policy.threshold


def choose_crop(image_shape, policy: CropPolicy, stream: RngStream) -> Optional[tuple[int, int]]:
    """Top-left corner of the crop, or None when the image is small enough."""
    if not needs_crop(image_shape, policy):
        return None
    h, w = image_shape[2], image_shape[3]
    if policy.size > min(h, w):
        raise ShapeError(f"crop {policy.size} larger than image {h}x{w}")
    top = int(stream.gen.integers(0, h - policy.size + 1))
    left = int(stream.gen.integers(0, w - policy.size + 1))
    return top, left


def crop_mask(image_shape, policy: CropPolicy, origin) -> np.ndarray:
    mask = np.zeros(image_shape, dtype=bool)
    if origin is None:
        mask[...] = True
        return mask
    top, left = origin
    s = policy.size
    if top + s > image_shape[2] or left + s > image_shape[3]:
        raise ShapeError(f"crop at {origin} of size {s} exceeds image {image_shape[2:]}")
    mask[:, :, top : top + s, left : left + s] = True
    return mask


# --- losses ----------------------------------------------------------------


def _bridge_term(out, batch: BridgeSample):
    diff = out - batch.drift
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def _pixel_term(out, batch: BridgeSample, codec: Codec, kind: str, policy: CropPolicy, origin):
    if batch.x1 is None:
        raise ShapeError("pixel loss needs the image-space target x1")
    x1 = np.asarray(batch.x1, dtype=np.float64)
    x1_hat = decode(codec, predict_target(out, batch.zt, batch.t))
    if x1_hat.shape != x1.shape:
        raise ShapeError(f"decoded prediction {x1_hat.shape} does not match target {x1.shape}")
    mask = crop_mask(x1.shape, policy, origin) if x1.ndim == 4 else np.ones(x1.shape, dtype=bool)
    count = int(mask.sum())
    diff = np.where(mask, x1_hat - x1, 0.0)
    if kind == "l2":
        value = float(np.sum(diff * diff) / count)
        g_img = 2.0 * diff / count
    elif kind == "l1":
        value = float(np.sum(np.abs(diff)) / count)
        g_img = np.sign(diff) / count
    else:
        raise ConfigError(f"unknown pixel loss kind {kind!r}")
    g_latent = decode_adjoint(codec, g_img)
    t = batch.t.reshape((-1,) + (1,) * (out.ndim - 1))
    return value, (1.0 - t) * g_latent


def _check_batch(batch: BridgeSample):
    if len(batch) == 0:
        raise ShapeError("empty batch")
    if not np.all(np.isfinite(batch.drift)):
        raise ShapeError("non-finite drift targets")


def lbm_loss(m: DriftModel, batch: BridgeSample) -> tuple[float, np.ndarray]:
    _check_batch(batch)
    out, acts = forward_cached(m, batch.zt, batch.t, batch.cond)
    value, up = _bridge_term(out, batch)
    return value, backward_cached(m, acts, up)


def pixel_loss(
    m: DriftModel,
    codec: Codec,
    batch: BridgeSample,
    kind: str = "l2",
    crop: CropPolicy = CropPolicy(),
    stream: Optional[RngStream] = None,
    origin: Optional[tuple[int, int]] = None,
) -> tuple[float, np.ndarray]:
    """Pixel loss between the decoded one-step prediction and ``batch.x1``.

    The crop corner is taken from ``origin`` if given, otherwise drawn
    from ``stream`` when the image is larger than the crop threshold.
    """
    _check_batch(batch)
    if origin is None and batch.x1 is not None and needs_crop(np.shape(batch.x1), crop):
        if stream is None:
            raise ValueError("image exceeds the crop threshold: pass a crop origin or a stream")
        origin = choose_crop(np.shape(batch.x1), crop, stream)
    out, acts = forward_cached(m, batch.zt, batch.t, batch.cond)
    value, up = _pixel_term(out, batch, codec, kind, crop, origin)
    return value, backward_cached(m, acts, up)


def total_loss(
    m: DriftModel,
    codec: Codec,
    batch: BridgeSample,
    lam: float = 0.0,
    kind: str = "l2",
    crop: CropPolicy = CropPolicy(),
    origin: Optional[tuple[int, int]] = None,
) -> Loss:
    """Bridge term plus ``lam`` times the pixel term, with one shared forward pass."""
    _check_batch(batch)
    out, acts = forward_cached(m, batch.zt, batch.t, batch.cond)
    bridge, up = _bridge_term(out, batch)
    pixel = 0.0
    if lam > 0:
        pixel, up_pix = _pixel_term(out, batch, codec, kind, crop, origin)
        up = up + lam * up_pix
    return Loss(bridge + lam * pixel, backward_cached(m, acts, up), bridge, pixel)


# --- training loop ---------------------------------------------------------


def build_batch(task, codec: Codec, cfg: TrainConfig, streams: dict[str, RngStream], n: int) -> BridgeSample:
    """Draw pairs, encode them, pick timesteps and noise, form z_t and drift targets."""
    x0, x1, cond = task.sample(n, streams["data"])
    z0 = encode(codec, x0)
    z1 = encode(codec, x1)
    c = encode(codec, cond) if cond is not None else None
    t = sample_t(cfg.timesteps, n, streams["time"])
    if cfg.timesteps.is_discrete and not np.all(cfg.timesteps.contains(t)):
        raise ScheduleError(f"timestep outside training support: {sorted(set(t) - set(cfg.timesteps.support))}")
    eps = gaussian_noise(z0.shape, streams["noise"])
    return make_bridge_sample(z0, z1, t, cfg.sigma, eps, cond=c, x1=x1)


def train_streams(seed: int) -> dict[str, RngStream]:
    root = RngStream(seed)
    return {name: root.split(name) for name in ("data", "time", "noise", "crop")}


def train_run(cfg: TrainConfig, task, codec: Codec, model: DriftModel) -> TrainReport:
    """Optimize a copy of ``model`` on ``task``; the input model is left untouched."""
    model = model.copy()
    opt = make_optimizer(cfg.optimizer, cfg.lr, cfg.betas, cfg.weight_decay)
    streams = train_streams(cfg.seed)
    n_it = cfg.iterations
    bridge = np.zeros(n_it)
    pixel = np.zeros(n_it)
    total = np.zeros(n_it)
    seen: set = set()
    start = time.perf_counter()
    for it in range(n_it):
        batch = build_batch(task, codec, cfg, streams, cfg.batch_size)
        if cfg.timesteps.is_discrete:
            seen.update(np.unique(batch.t).tolist())
        origin = None
        if cfg.lam > 0:
            origin = choose_crop(np.shape(batch.x1), cfg.crop, streams["crop"])
        loss = total_loss(model, codec, batch, cfg.lam, cfg.pixel_loss, cfg.crop, origin)
        if not np.isfinite(loss.total) or loss.total > DIVERGENCE_LIMIT:
            raise DivergenceError(
                f"loss diverged at iteration {it + 1}: total={loss.total:.4g} "
                f"(bridge={loss.bridge:.4g}, pixel={loss.pixel:.4g}); try a lower learning rate"
            )
        bridge[it], pixel[it], total[it] = loss.bridge, loss.pixel, loss.total
        opt.step(model.params, loss.grad)
        if (it + 1) % 1000 == 0:
            logger.info("iter %d  bridge %.5f  pixel %.5f", it + 1, loss.bridge, loss.pixel)
    return TrainReport(bridge, pixel, total, time.perf_counter() - start, model, seen)


def write_loss_csv(path: str | os.PathLike, report: TrainReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "bridge_loss", "pixel_loss", "total_loss"])
        for i, (b, p, t) in enumerate(zip(report.bridge, report.pixel, report.total), start=1):
            w.writerow([i, repr(float(b)), repr(float(p)), repr(float(t))])
