"""Brownian-bridge interpolant, its drift target and the one-step reconstruction.

For a pair ``(z0, z1)``, time ``t`` and noise level ``sigma``::

    z_t   = (1 - t) z0 + t z1 + sigma * sqrt(t (1 - t)) * eps
    drift = (z1 - z_t) / (1 - t)
    z1_hat = (1 - t) * v + z_t

``t`` is one scalar per batch element, broadcast over feature dims.
Outputs are float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from lbm.errors import ShapeError, SingularityError

T_MAX = 1.0 - 1e-6


def per_sample(t, n: int) -> np.ndarray:
    """Coerce ``t`` (scalar or length-``n`` vector) to a float64 vector."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        return np.full(n, float(t))
    t = t.reshape(-1)
    if t.shape[0] != n:
        raise ShapeError(f"expected {n} time values, got {t.shape[0]}")
    return t


def _expand(t: np.ndarray, ndim: int) -> np.ndarray:
    return t.reshape((-1,) + (1,) * (ndim - 1))


def _same_shape(*arrays):
    shape = arrays[0].shape
    for a in arrays[1:]:
        if a.shape != shape:
            raise ShapeError(f"shape mismatch: {shape} vs {a.shape}")


def interpolate(z0, z1, t, sigma: float, eps=None) -> np.ndarray:
    z0 = np.asarray(z0, dtype=np.float64)
    z1 = np.asarray(z1, dtype=np.float64)
    _same_shape(z0, z1)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    t = per_sample(t, z0.shape[0])
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("t must lie in [0, 1]")
    tb = _expand(t, z0.ndim)
    zt = (1.0 - tb) * z0 + tb * z1
    if sigma > 0:
        eps = np.asarray(eps, dtype=np.float64)
        _same_shape(z0, eps)
        zt = zt + sigma * np.sqrt(tb * (1.0 - tb)) * eps
    return zt


def drift_target(z1, zt, t) -> np.ndarray:
    z1 = np.asarray(z1, dtype=np.float64)
    zt = np.asarray(zt, dtype=np.float64)
    _same_shape(z1, zt)
    t = per_sample(t, z1.shape[0])
    if np.any(t > T_MAX):
        raise SingularityError(f"drift undefined for t > {T_MAX}; got max t={t.max()}")
    return (z1 - zt) / (1.0 - _expand(t, z1.ndim))


def predict_target(v, zt, t) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    zt = np.asarray(zt, dtype=np.float64)
    _same_shape(v, zt)
    t = per_sample(t, v.shape[0])
    if np.any(t >= 1):
        raise SingularityError("predict_target needs t < 1")
    return (1.0 - _expand(t, v.ndim)) * v + zt


@dataclass(frozen=True)
class BridgeSample:
    """One training batch of bridge tuples.

    ``x1`` is the image-space target, carried only for the pixel loss.
    """

    z0: np.ndarray
    z1: np.ndarray
    t: np.ndarray
    eps: np.ndarray
    zt: np.ndarray
    drift: np.ndarray
    cond: Optional[np.ndarray] = None
    x1: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.z0.shape[0]


def make_bridge_sample(z0, z1, t, sigma: float, eps, cond=None, x1=None) -> BridgeSample:
    z0 = np.asarray(z0, dtype=np.float64)
    z1 = np.asarray(z1, dtype=np.float64)
    t = per_sample(t, z0.shape[0])
    eps = np.asarray(eps, dtype=np.float64)
    zt = interpolate(z0, z1, t, sigma, eps)
    drift = drift_target(z1, zt, t)
    if cond is not None:
        cond = np.asarray(cond, dtype=np.float64)
        if cond.shape[0] != z0.shape[0] or cond.shape[2:] != z0.shape[2:]:
            raise ShapeError(f"condition shape {cond.shape} incompatible with latent {z0.shape}")
    return BridgeSample(z0, z1, t, eps, zt, drift, cond, x1)
