"""Fixed linear encoder/decoder pairs that stand in for a pretrained VAE.

``identity``      latent == input (the only codec accepting rank-2 batches)
``shuffle:f``     lossless space-to-channel rearrangement, (c, h, w) -> (c f^2, h/f, w/f)
``pool:f``        f x f block mean; decode is nearest-neighbour upsampling
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lbm.errors import ConfigError, ShapeError

KINDS = ("identity", "shuffle", "pool")


@dataclass(frozen=True)
class Codec:
    kind: str = "identity"
    factor: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown codec kind {self.kind!r}")
        if self.factor < 1 or (self.kind == "identity" and self.factor != 1):
            raise ConfigError(f"bad codec factor {self.factor} for {self.kind}")

    def to_spec(self) -> str:
        return "identity" if self.kind == "identity" else f"{self.kind}:{self.factor}"

    def latent_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        shape = tuple(shape)
        if self.kind == "identity":
            return shape
        _check_image(shape, self.factor)
        n, c, h, w = shape
        f = self.factor
        channels = c * f * f if self.kind == "shuffle" else c
        return (n, channels, h // f, w // f)

    def image_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        shape = tuple(shape)
        if self.kind == "identity":
            return shape
        if len(shape) != 4:
            raise ShapeError(f"{self.to_spec()} decodes rank-4 latents only, got {shape}")
        n, c, h, w = shape
        f = self.factor
        if self.kind == "shuffle":
            if c % (f * f):
                raise ShapeError(f"latent channels {c} not divisible by {f * f}")
            return (n, c // (f * f), h * f, w * f)
        return (n, c, h * f, w * f)


def _check_image(shape, f):
    if len(shape) != 4:
        raise ShapeError(f"spatial codecs need rank-4 input, got shape {shape}")
    if shape[2] % f or shape[3] % f:
        raise ShapeError(f"spatial dims {shape[2:]} not divisible by factor {f}")


def parse_codec(spec: str) -> Codec:
    spec = spec.strip()
    if spec == "identity":
        return Codec()
    kind, _, factor = spec.partition(":")
    try:
        return Codec(kind, int(factor))
    except ValueError as exc:
        raise ConfigError(f"bad codec spec {spec!r}; expected identity, shuffle:F or pool:F") from exc


def encode(c: Codec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if c.kind == "identity":
        return x
    c.latent_shape(x.shape)
    n, ch, h, w = x.shape
    f = c.factor
    blocks = x.reshape(n, ch, h // f, f, w // f, f)
    if c.kind == "shuffle":
        return blocks.transpose(0, 1, 3, 5, 2, 4).reshape(n, ch * f * f, h // f, w // f)
    return blocks.mean(axis=(3, 5), dtype=np.float64).astype(x.dtype, copy=False)


def decode(c: Codec, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z)
    if c.kind == "identity":
        return z
    n, ch, h, w = c.image_shape(z.shape)
    f = c.factor
    if c.kind == "shuffle":
        return z.reshape(n, ch, f, f, h // f, w // f).transpose(0, 1, 4, 2, 5, 3).reshape(n, ch, h, w)
    return np.repeat(np.repeat(z, f, axis=2), f, axis=3)


def decode_adjoint(c: Codec, g: np.ndarray) -> np.ndarray:
    """Transpose of the decoder applied to an image-space gradient."""
    g = np.asarray(g)
    if c.kind == "identity":
        return g
    if c.kind == "shuffle":
        return encode(c, g)
    n, ch, h, w = g.shape
    f = c.factor
    return g.reshape(n, ch, h // f, f, w // f, f).sum(axis=(3, 5))
