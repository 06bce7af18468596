"""Euler-Maruyama integration of the learned bridge SDE, plus output writers.

One step::

    z <- z + v(z, t, c) dt + sigma sqrt(dt) xi,   xi ~ N(0, I)

With ``sigma == 0`` the noise term is skipped and the run is a plain
Euler ODE solve, independent of the stream.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from lbm.bridge import per_sample
from lbm.codec import Codec, decode, encode
from lbm.core import RngStream, gaussian_noise
from lbm.errors import ScheduleError, ShapeError
from lbm.model import DriftModel, forward

DriftFn = Callable[[np.ndarray, np.ndarray, Optional[np.ndarray]], np.ndarray]


def as_drift_fn(m: Union[DriftModel, DriftFn]) -> DriftFn:
    if isinstance(m, DriftModel):
        return lambda z, t, c: forward(m, z, t, c)
    return m


@dataclass
class SolverRun:
    ts: np.ndarray
    dts: np.ndarray
    sigma: float
    final: np.ndarray
    nfe: int = 0
    evaluated_at: list[float] = field(default_factory=list)
    trajectory: Optional[list[np.ndarray]] = None


def em_step(m, zt, t, dt: float, sigma: float, xi=None, c=None) -> np.ndarray:
    t = float(t)
    if dt <= 0 or t + dt > 1.0 + 1e-9:
        raise ScheduleError(f"step from t={t} with dt={dt} overshoots t=1")
    zt = np.asarray(zt, dtype=np.float64)
    v = as_drift_fn(m)(zt, per_sample(t, zt.shape[0]), c)
    out = zt + v * dt
    if sigma > 0:
        out = out + sigma * np.sqrt(dt) * np.asarray(xi, dtype=np.float64)
    return out


def sample_path(
    m,
    z0,
    grid: tuple[np.ndarray, np.ndarray],
    sigma: float,
    stream: Optional[RngStream] = None,
    cond=None,
    record: bool = False,
) -> SolverRun:
    """Run sequential Euler-Maruyama steps over ``grid`` = (times, step sizes)."""
    ts, dts = (np.asarray(g, dtype=np.float64) for g in grid)
    if ts.shape != dts.shape or ts.size == 0:
        raise ScheduleError("grid needs matching, non-empty time and step arrays")
    if abs(ts[0]) > 1e-12 or abs(float(ts[-1] + dts[-1]) - 1.0) > 1e-9:
        raise ScheduleError("grid must start at t=0 and end at t=1")
    if sigma > 0 and stream is None:
        raise ValueError("a noise stream is required when sigma > 0")
    drift = as_drift_fn(m)
    run = SolverRun(ts, dts, sigma, final=None, trajectory=[] if record else None)

    def counted(z, t, c):
        run.nfe += 1
        run.evaluated_at.append(float(t[0]))
        return drift(z, t, c)

    z = np.asarray(z0, dtype=np.float64)
    if record:
        run.trajectory.append(z.copy())
    for t, dt in zip(ts, dts):
        xi = gaussian_noise(z.shape, stream) if sigma > 0 else None
        z = em_step(counted, z, t, float(dt), sigma, xi, cond)
        if record:
            run.trajectory.append(z.copy())
    run.final = z
    return run


def translate(m, codec: Codec, x0, grid, sigma: float, stream=None, cond=None) -> tuple[np.ndarray, SolverRun]:
    """Encode, integrate the bridge SDE in latent space, decode."""
    z0 = encode(codec, np.asarray(x0))
    c = encode(codec, np.asarray(cond)) if cond is not None else None
    run = sample_path(m, z0, grid, sigma, stream, c)
    return decode(codec, run.final), run


# --- output formats --------------------------------------------------------


def write_points_csv(path: str | os.PathLike, pts: np.ndarray) -> None:
    pts = np.asarray(pts)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeError(f"point CSV needs an [n, 2] batch, got {pts.shape}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in pts.astype(np.float32):
            w.writerow([repr(float(x)), repr(float(y))])


def to_pgm_bytes(img: np.ndarray) -> bytes:
    """Binary greyscale PGM (P5, maxval 255); [0, 1] maps linearly, outside is clamped."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3 and img.shape[0] == 1:
        img = img[0]
    if img.ndim != 2:
        raise ShapeError(f"PGM needs a single-channel image, got shape {img.shape}")
    h, w = img.shape
    pix = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()


def write_pgm(path: str | os.PathLike, img: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(to_pgm_bytes(img))
