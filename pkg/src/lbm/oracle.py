"""Ground-truth drifts for 1D Gaussian endpoints.

Under independent coupling ``z0 ~ N(mu0, s0^2)``, ``z1 ~ N(mu1, s1^2)`` the
pair ``(z_t, z1)`` is jointly Gaussian with

    mean(z_t) = (1 - t) mu0 + t mu1
    var(z_t)  = (1 - t)^2 s0^2 + t^2 s1^2 + sigma^2 t (1 - t)
    cov(z_t, z1) = t s1^2

so the Markov-projected drift E[(z1 - z_t)/(1 - t) | z_t = z] is affine in z.
:func:`mc_binned_drift` estimates the same conditional mean by brute force.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from lbm.bridge import T_MAX
from lbm.core import RngStream
from lbm.errors import ConfigError, SingularityError


@dataclass(frozen=True)
class GaussianTaskSpec:
    mu0: float = 0.0
    s0: float = 1.0
    mu1: float = 2.0
    s1: float = 1.0
    sigma: float = 0.1

    def __post_init__(self):
        if self.s0 <= 0 or self.s1 <= 0:
            raise ConfigError(f"scales must be positive, got s0={self.s0}, s1={self.s1}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")

    def marginal(self, t):
        t = np.asarray(t, dtype=np.float64)
        mean = (1 - t) * self.mu0 + t * self.mu1
        var = (1 - t) ** 2 * self.s0**2 + t**2 * self.s1**2 + self.sigma**2 * t * (1 - t)
        return mean, var

    def flow_limit(self) -> "GaussianTaskSpec":
        return replace(self, sigma=0.0)


def parse_gaussian_spec(spec: str, sigma: float = 0.1) -> GaussianTaskSpec:
    """Parse ``gauss1d:mu0,s0,mu1,s1`` (the prefix is optional)."""
    body = spec.strip()
    if body.startswith("gauss1d:"):
        body = body[len("gauss1d:") :]
    try:
        mu0, s0, mu1, s1 = (float(v) for v in body.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad Gaussian spec {spec!r}; expected gauss1d:mu0,s0,mu1,s1") from exc
    return GaussianTaskSpec(mu0, s0, mu1, s1, sigma)


def gaussian_drift(spec: GaussianTaskSpec, z, t):
    z = np.asarray(z, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0) or np.any(t > T_MAX):
        raise SingularityError(f"gaussian_drift needs 0 <= t < 1, got {t}")
    mean, var = spec.marginal(t)
    gain = t * spec.s1**2 / var
    cond_mean = spec.mu1 + gain * (z - mean)
    return (cond_mean - z) / (1 - t)


@dataclass
class BinnedDrift:
    t: float
    centers: np.ndarray
    drift: np.ndarray  # NaN where the bin is empty
    count: np.ndarray
    stderr: np.ndarray  # NaN where count < 2
    zmean: np.ndarray  # within-bin mean of z_t; the closed form is affine, so compare there

    @property
    def valid(self) -> np.ndarray:
        return self.count >= 2


def mc_binned_drift(
    spec: GaussianTaskSpec,
    t: float,
    n: int,
    bins: int,
    stream: RngStream,
    centers: Sequence[float] | None = None,
    width: float | None = None,
) -> BinnedDrift:
    """Average raw drifts ``(z1 - z_t)/(1 - t)`` inside z_t bins.

    By default ``bins`` equal-width bins tile ``mean +- 4 sd`` of the z_t
    marginal. Explicit ``centers`` with a common ``width`` may instead
    place (possibly non-tiling) bins on a fixed grid.
    """
    if t < 0 or t > T_MAX:
        raise SingularityError(f"t must lie in [0, 1), got {t}")
    if centers is None:
        if n < bins * 50:
            raise ValueError(f"need n >= 50 * bins = {bins * 50}, got {n}")
        mean, var = spec.marginal(t)
        sd = float(np.sqrt(var))
        width = 8 * sd / bins
        centers = mean - 4 * sd + width * (np.arange(bins) + 0.5)
    else:
        if width is None or width <= 0:
            raise ValueError("explicit centers need a positive width")
        centers = np.asarray(centers, dtype=np.float64)
        if n < len(centers) * 50:
            raise ValueError(f"need n >= 50 * bins = {len(centers) * 50}, got {n}")
    g = stream.gen
    z0 = spec.mu0 + spec.s0 * g.standard_normal(n)
    z1 = spec.mu1 + spec.s1 * g.standard_normal(n)
    eps = g.standard_normal(n)
    zt = (1 - t) * z0 + t * z1 + spec.sigma * np.sqrt(t * (1 - t)) * eps
    raw = (z1 - zt) / (1 - t)

    if len(centers) == 1:
        idx = np.zeros(n, dtype=np.intp)
    else:
        idx = np.clip(np.searchsorted(centers, zt), 1, len(centers) - 1)
        left = centers[idx - 1]
        idx = np.where(np.abs(zt - left) <= np.abs(zt - centers[idx]), idx - 1, idx)
    keep = np.abs(zt - centers[idx]) <= width / 2
    idx, raw = idx[keep], raw[keep]
    k = len(centers)
    count = np.bincount(idx, minlength=k)
    s1 = np.bincount(idx, weights=raw, minlength=k)
    s2 = np.bincount(idx, weights=raw * raw, minlength=k)
    sz = np.bincount(idx, weights=zt[keep], minlength=k)
    with np.errstate(invalid="ignore", divide="ignore"):
        drift = np.where(count > 0, s1 / count, np.nan)
        zmean = np.where(count > 0, sz / count, np.nan)
        var = np.where(count > 1, (s2 - count * drift**2) / (count - 1), np.nan)
        stderr = np.sqrt(np.maximum(var, 0.0) / count)
    return BinnedDrift(float(t), np.asarray(centers, dtype=np.float64), drift, count, stderr, zmean)


def oracle_table(
    spec: GaussianTaskSpec,
    ts: Sequence[float],
    zgrid: Sequence[float],
    n: int,
    stream: RngStream,
    width: float = 0.1,
) -> list[dict]:
    """Closed form vs Monte-Carlo drift on a (t, z) grid; one dict per row."""
    rows = []
    zgrid = np.asarray(zgrid, dtype=np.float64)
    for i, t in enumerate(ts):
        mc = mc_binned_drift(spec, t, n, len(zgrid), stream.split("t", i), centers=zgrid, width=width)
        v_star = gaussian_drift(spec, zgrid, t)
        for z, vs, vm, se, c in zip(zgrid, v_star, mc.drift, mc.stderr, mc.count):
            rows.append(
                dict(t=float(t), z=float(z), v_star=float(vs), v_mc=float(vm), stderr=float(se),
                     count=int(c), abs_dev=float(abs(vm - vs)), tol_3se=float(3 * se))
            )
    return rows


def drift_rms(drift_fn, spec: GaussianTaskSpec, ts: Sequence[float], zgrid: Sequence[float]) -> float:
    """RMS of ``drift_fn(z, t) - gaussian_drift`` weighted by the z_t marginal density."""
    num = den = 0.0
    zgrid = np.asarray(zgrid, dtype=np.float64)
    for t in ts:
        mean, var = spec.marginal(t)
        w = np.exp(-0.5 * (zgrid - mean) ** 2 / var) / np.sqrt(2 * np.pi * var)
        err = np.asarray(drift_fn(zgrid, t), dtype=np.float64).reshape(-1) - gaussian_drift(spec, zgrid, t)
        num += float(np.sum(w * err * err))
        den += float(np.sum(w))
    return float(np.sqrt(num / den))
