"""Sample-based metrics: energy distance, sliced Wasserstein, MSE/PSNR, mode coverage."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from lbm.core import RngStream
from lbm.errors import ShapeError


@dataclass
class MetricReport:
    name: str
    value: float
    stderr: float = float("nan")


def _flat(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return x.reshape(x.shape[0], int(np.prod(x.shape[1:])))


def energy_distance(a, b) -> float:
    """V-statistic ``2 E|A-B| - E|A-A'| - E|B-B'|`` from exact pairwise sums."""
    a, b = _flat(a), _flat(b)
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    if len(a) < 1 or len(b) < 1:
        raise ShapeError("energy distance needs non-empty samples")
    ab = cdist(a, b).mean()
    aa = cdist(a, a).mean()
    bb = cdist(b, b).mean()
    return float(max(2.0 * ab - aa - bb, 0.0))


def sliced_wasserstein(a, b, projections: int, stream: RngStream) -> float:
    """Mean over random unit directions of the 1D W2 between projections.

    Unequal sample sizes are handled by subsampling the larger set
    without replacement.
    """
    a, b = _flat(a), _flat(b)
    if len(a) == 0 or len(b) == 0:
        raise ShapeError("sliced Wasserstein needs non-empty samples")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    if projections < 1:
        raise ValueError("need at least one projection")
    g = stream.gen
    if len(a) > len(b):
        a = a[g.choice(len(a), len(b), replace=False)]
    elif len(b) > len(a):
        b = b[g.choice(len(b), len(a), replace=False)]
    d = a.shape[1]
    if d == 1:
        dirs = np.ones((projections, 1))
    else:
        dirs = g.standard_normal((projections, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pa = np.sort(a @ dirs.T, axis=0)
    pb = np.sort(b @ dirs.T, axis=0)
    return float(np.mean(np.sqrt(np.mean((pa - pb) ** 2, axis=0))))


def paired_metrics(pred, target) -> tuple[float, float]:
    """(MSE, PSNR) for images in [0, 1]; PSNR is +inf when MSE == 0."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"shape mismatch: {pred.shape} vs {target.shape}")
    mse = float(np.mean((pred - target) ** 2))
    psnr = math.inf if mse == 0 else 10.0 * math.log10(1.0 / mse)
    return mse, psnr


@dataclass
class Coverage:
    fractions: tuple[float, ...]
    covered: bool


def conditional_coverage(outputs, centers: Sequence[Sequence[float]], radius: float, min_fraction: float = 0.1) -> Coverage:
    outputs = _flat(outputs)
    if len(outputs) == 0:
        raise ShapeError("coverage of an empty output set")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[1] != outputs.shape[1]:
        raise ShapeError(f"centers {centers.shape} do not match output dim {outputs.shape[1]}")
    dist = cdist(outputs, centers)
    fractions = tuple(float(f) for f in np.mean(dist <= radius, axis=0))
    return Coverage(fractions, all(f >= min_fraction for f in fractions))
