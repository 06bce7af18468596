"""Procedural paired tasks: tiny analogs of image-to-image translation problems.

Every task exposes ``sample(n, stream) -> (x0, x1, cond)`` returning float32
batches (``cond`` is None for unconditional tasks). Output depends only on
``n`` and the stream state.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from lbm.core import RngStream
from lbm.errors import ConfigError


class PairedTask:
    name: str = ""
    rank: int = 2
    coupling: str = "independent"
    conditional: bool = False

    def sample(self, n: int, stream: RngStream):
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


@dataclass(repr=False)
class Gauss1D(PairedTask):
    mu0: float = 0.0
    s0: float = 1.0
    mu1: float = 2.0
    s1: float = 1.0

    def __post_init__(self):
        if self.s0 <= 0 or self.s1 <= 0:
            raise ConfigError(f"gauss1d scales must be positive, got {self.s0}, {self.s1}")
        self.name = f"gauss1d:{self.mu0:g},{self.s0:g},{self.mu1:g},{self.s1:g}"

    def sample(self, n, stream):
        g = stream.gen
        x0 = self.mu0 + self.s0 * g.standard_normal((n, 1))
        x1 = self.mu1 + self.s1 * g.standard_normal((n, 1))
        return x0.astype(np.float32), x1.astype(np.float32), None


def gauss1d(mu0=0.0, s0=1.0, mu1=2.0, s1=1.0) -> Gauss1D:
    return Gauss1D(mu0, s0, mu1, s1)


class Rings2D(PairedTask):
    """Standard 2D Gaussian to a radius-2 ring with radial noise 0.05."""

    name = "rings2d"
    radius = 2.0
    radial_noise = 0.05

    def sample(self, n, stream):
        g = stream.gen
        x0 = g.standard_normal((n, 2))
        theta = g.uniform(0.0, 2 * np.pi, n)
        r = self.radius + self.radial_noise * g.standard_normal(n)
        x1 = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
        return x0.astype(np.float32), x1.astype(np.float32), None


def rings2d() -> Rings2D:
    return Rings2D()


class PointToBimodal(PairedTask):
    """Point mass at the origin to an even mixture of N((+-2, 0), 0.1 I)."""

    name = "point_to_bimodal"
    mode_centers = ((-2.0, 0.0), (2.0, 0.0))
    mode_var = 0.1

    def sample(self, n, stream):
        g = stream.gen
        side = np.where(g.random(n) < 0.5, -1.0, 1.0)
        x1 = np.sqrt(self.mode_var) * g.standard_normal((n, 2))
        x1[:, 0] += 2.0 * side
        return np.zeros((n, 2), dtype=np.float32), x1.astype(np.float32), None


def point_to_bimodal() -> PointToBimodal:
    return PointToBimodal()


class InpaintToy(PairedTask):
    """Smooth backgrounds with one square hole filled by uniform noise.

    ``x1`` is a sum of three random low-frequency cosines rescaled to
    [0, 1]; ``x0`` is ``x1`` with a ``side/4`` square replaced by
    i.i.d. U[0, 1] pixels.
    """

    rank = 4
    coupling = "paired"

    def __init__(self, side: int = 16):
        if side < 8 or side % 4:
            raise ConfigError(f"inpaint side must be >= 8 and divisible by 4, got {side}")
        self.side = side
        self.hole = side // 4
        self.name = f"inpaint{side}"

    def sample_with_mask(self, n, stream):
        g = stream.gen
        s = self.side
        ii, jj = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
        # frequencies in {0, 1, 2}^2 minus the constant mode
        freq = g.integers(0, 8, size=(n, 3)) + 1
        kx, ky = freq % 3, freq // 3
        phase = g.uniform(0, 2 * np.pi, (n, 3))
        amp = g.uniform(0.5, 1.0, (n, 3))
        arg = 2 * np.pi * (kx[:, :, None, None] * jj + ky[:, :, None, None] * ii) / s + phase[:, :, None, None]
        img = np.sum(amp[:, :, None, None] * np.cos(arg), axis=1)
        lo = img.min(axis=(1, 2), keepdims=True)
        span = img.max(axis=(1, 2), keepdims=True) - lo
        img = np.where(span > 1e-8, (img - lo) / np.where(span > 1e-8, span, 1.0), 0.5)
        x1 = img[:, None].astype(np.float32)

        top = g.integers(0, s - self.hole + 1, n)
        left = g.integers(0, s - self.hole + 1, n)
        mask = np.zeros((n, 1, s, s), dtype=bool)
        for k in range(n):
            mask[k, 0, top[k] : top[k] + self.hole, left[k] : left[k] + self.hole] = True
        noise = g.random((n, 1, s, s)).astype(np.float32)
        x0 = np.where(mask, noise, x1)
        return x0, x1, mask

    def sample(self, n, stream):
        x0, x1, _ = self.sample_with_mask(n, stream)
        return x0, x1, None


def inpaint_toy(side: int = 16) -> InpaintToy:
    return InpaintToy(side)


DARK_LEVEL = 0.1
DARK_THRESHOLD = 0.25


class ShadowToy(PairedTask):
    """Conditional shadow analog.

    ``x0``: bright 4x4 square centred on a grey ground. ``c``: a light map
    holding one Gaussian blob (amplitude 1, std 1.5 px) left or right of
    centre. ``x1``: ``x0`` plus a dark bar beside the square, on the side
    away from the light.
    """

    rank = 4
    coupling = "paired"
    conditional = True
    blob_std = 1.5

    def __init__(self, side: int = 12):
        if side < 8 or side % 2:
            raise ConfigError(f"shadow side must be even and >= 8, got {side}")
        self.side = side
        self.name = f"shadow{side}"
        self.max_bar = min(3, side // 2 - 2)

    def render(self, ground, row, offset, bar_len, light_left):
        """Vectorized renderer; every argument is a length-n array."""
        ground = np.asarray(ground, dtype=np.float64)
        n, s = ground.shape[0], self.side
        lo, hi = s // 2 - 2, s // 2 + 2
        x0 = np.broadcast_to(ground[:, None, None], (n, s, s)).copy()
        x0[:, lo:hi, lo:hi] = 1.0
        x1 = x0.copy()
        for k in range(n):
            L = int(bar_len[k])
            # shadow falls away from the light
            cols = slice(hi, hi + L) if light_left[k] else slice(lo - L, lo)
            x1[k, lo:hi, cols] = DARK_LEVEL
        centre = (s - 1) / 2
        col = np.where(light_left, centre - offset, centre + offset)
        ii, jj = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
        d2 = (ii[None] - np.asarray(row)[:, None, None]) ** 2 + (jj[None] - col[:, None, None]) ** 2
        c = np.exp(-d2 / (2 * self.blob_std**2))
        return _as_images(x0), _as_images(x1), _as_images(c)

    def draw_params(self, n, stream):
        g = stream.gen
        s = self.side
        return dict(
            ground=g.uniform(0.4, 0.6, n),
            row=g.uniform(s / 4, 3 * s / 4, n),
            offset=g.uniform(2.5, s / 2 - 1, n),
            bar_len=g.integers(2, self.max_bar + 1, n),
            light_left=g.random(n) < 0.5,
        )

    def sample(self, n, stream):
        return self.render(**self.draw_params(n, stream))


def _as_images(a):
    return a[:, None].astype(np.float32)


def shadow_toy(side: int = 12) -> ShadowToy:
    return ShadowToy(side)


def light_is_left(c: np.ndarray) -> np.ndarray:
    """Which side of centre each light map's mass sits on."""
    c = np.asarray(c, dtype=np.float64)
    w = c.shape[-1]
    mass = c.reshape(c.shape[0], -1, w).sum(axis=1)
    centroid = (mass * np.arange(w)).sum(axis=1) / mass.sum(axis=1)
    return centroid < (w - 1) / 2


def bar_on_right(x: np.ndarray) -> np.ndarray:
    """Decide the shadow side by comparing mean darkness of the two halves."""
    x = np.asarray(x, dtype=np.float64)
    w = x.shape[-1]
    dark = 1.0 - x
    return dark[..., w // 2 :].mean(axis=(1, 2, 3)) > dark[..., : w // 2].mean(axis=(1, 2, 3))


def parse_task(spec: str) -> PairedTask:
    spec = spec.strip()
    if spec.startswith("gauss1d"):
        body = spec.partition(":")[2] or "0,1,2,1"
        try:
            mu0, s0, mu1, s1 = (float(v) for v in body.split(","))
            return gauss1d(mu0, s0, mu1, s1)
        except ValueError as exc:
            raise ConfigError(f"bad task {spec!r}; expected gauss1d:mu0,s0,mu1,s1") from exc
    if spec == "rings2d":
        return rings2d()
    if spec == "point_to_bimodal":
        return point_to_bimodal()
    m = re.fullmatch(r"(inpaint|shadow)(\d+)", spec)
    if m:
        return (inpaint_toy if m.group(1) == "inpaint" else shadow_toy)(int(m.group(2)))
    raise ConfigError(
        f"unknown task {spec!r}; expected gauss1d:mu0,s0,mu1,s1, rings2d, point_to_bimodal, inpaintN or shadowN"
    )
