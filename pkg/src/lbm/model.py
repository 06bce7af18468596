"""Reference drift network: an MLP with hand-written reverse-mode gradients.

The network input for one sample is ``[flatten(z_t), t, flatten(c)]``;
hidden layers use tanh, the output layer is linear and reshaped to the
latent shape.

Parameter layout in the flat vector, layer by layer::

    W_l  (w_in x w_out, row-major) | b_l  (w_out)

so a layer computes ``a @ W_l + b_l``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from lbm.bridge import per_sample
from lbm.core import RngStream, read_tensor, write_tensor
from lbm.errors import FormatError, ShapeError

DEFAULT_HIDDEN = (128, 128)


def param_count(widths: Sequence[int]) -> int:
    return sum(a * b + b for a, b in zip(widths[:-1], widths[1:]))


def default_widths(latent_dim: int, cond_dim: int = 0, hidden: Sequence[int] = DEFAULT_HIDDEN) -> tuple[int, ...]:
    return (latent_dim + 1 + cond_dim, *hidden, latent_dim)


@dataclass
class DriftModel:
    widths: tuple[int, ...]
    params: np.ndarray
    cond_dim: int = 0

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        _check_widths(self.widths, self.cond_dim)
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (param_count(self.widths),):
            raise ShapeError(
                f"params length {self.params.size} != {param_count(self.widths)} for widths {self.widths}"
            )

    @property
    def latent_dim(self) -> int:
        return self.widths[-1]

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(W, b) views into ``params``."""
        out, k = [], 0
        for a, b in zip(self.widths[:-1], self.widths[1:]):
            W = self.params[k : k + a * b].reshape(a, b)
            k += a * b
            out.append((W, self.params[k : k + b]))
            k += b
        return out

    def copy(self) -> "DriftModel":
        return DriftModel(self.widths, self.params.copy(), self.cond_dim)


def _check_widths(widths, cond_dim):
    if len(widths) < 2:
        raise ShapeError(f"need at least an input and an output width, got {widths}")
    if any(w < 1 for w in widths):
        raise ShapeError(f"widths must be positive: {widths}")
    if cond_dim < 0 or widths[0] != widths[-1] + 1 + cond_dim:
        raise ShapeError(
            f"input width {widths[0]} must equal latent {widths[-1]} + 1 + cond {cond_dim}"
        )


def init_params(widths: Sequence[int], stream: RngStream, cond_dim: int = 0) -> DriftModel:
    """Weights ~ N(0, 1/fan_in), zero biases."""
    widths = tuple(int(w) for w in widths)
    _check_widths(widths, cond_dim)
    chunks = []
    for a, b in zip(widths[:-1], widths[1:]):
        chunks.append(stream.gen.standard_normal(a * b) / np.sqrt(a))
        chunks.append(np.zeros(b))
    return DriftModel(widths, np.concatenate(chunks), cond_dim)


def model_inputs(m: DriftModel, zt, t, c=None) -> np.ndarray:
    zt = np.asarray(zt, dtype=np.float64)
    n = zt.shape[0]
    flat = zt.reshape(n, -1)
    if flat.shape[1] != m.latent_dim:
        raise ShapeError(f"latent has {flat.shape[1]} features, model expects {m.latent_dim}")
    parts = [flat, per_sample(t, n)[:, None]]
    if m.cond_dim:
        if c is None:
            raise ShapeError("model is conditional but no condition was given")
        cf = np.asarray(c, dtype=np.float64).reshape(n, -1)
        if cf.shape[1] != m.cond_dim:
            raise ShapeError(f"condition has {cf.shape[1]} features, model expects {m.cond_dim}")
        parts.append(cf)
    elif c is not None:
        raise ShapeError("model is unconditional but a condition was given")
    return np.concatenate(parts, axis=1)


def forward_cached(m: DriftModel, zt, t, c=None) -> tuple[np.ndarray, list[np.ndarray]]:
    """Forward pass returning the output and the per-layer inputs."""
    a = model_inputs(m, zt, t, c)
    acts = []
    layers = m.layers()
    for i, (W, b) in enumerate(layers):
        acts.append(a)
        a = a @ W + b
        if i < len(layers) - 1:
            a = np.tanh(a)
    return a.reshape(np.shape(zt)), acts


def forward(m: DriftModel, zt, t, c=None) -> np.ndarray:
    return forward_cached(m, zt, t, c)[0]


def backward_cached(m: DriftModel, acts: list[np.ndarray], upstream) -> np.ndarray:
    g = np.asarray(upstream, dtype=np.float64).reshape(acts[0].shape[0], -1)
    grads = []
    layers = m.layers()
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        a = acts[i]
        grads.append(g.sum(axis=0))
        grads.append((a.T @ g).reshape(-1))
        if i > 0:
            # acts[i] is tanh output of the previous layer
            g = (g @ W.T) * (1.0 - a * a)
    return np.concatenate(grads[::-1])


def backward(m: DriftModel, zt, t, c, upstream) -> np.ndarray:
    """Gradient of ``sum(forward(m, zt, t, c) * upstream)`` w.r.t. ``m.params``."""
    out, acts = forward_cached(m, zt, t, c)
    if np.shape(upstream) != out.shape:
        raise ShapeError(f"upstream gradient shape {np.shape(upstream)} != output {out.shape}")
    return backward_cached(m, acts, upstream)


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".txt")


def save_checkpoint(path: str | os.PathLike, m: DriftModel) -> None:
    path = Path(path)
    write_tensor(path, m.params[None, :].astype(np.float32))
    _sidecar(path).write_text(
        f"widths={','.join(map(str, m.widths))}\ncond_dim={m.cond_dim}\n", encoding="utf-8"
    )


def load_checkpoint(path: str | os.PathLike) -> DriftModel:
    path = Path(path)
    params = read_tensor(path)
    meta = {}
    for line in _sidecar(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    try:
        widths = tuple(int(w) for w in meta["widths"].split(","))
        cond_dim = int(meta["cond_dim"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{_sidecar(path)}: malformed checkpoint sidecar") from exc
    if params.ndim != 2 or params.shape[0] != 1:
        raise FormatError(f"{path}: checkpoint must be a [1, P] tensor, got {params.shape}")
    return DriftModel(widths, params[0].astype(np.float64), cond_dim)
