"""Random streams, batch validation and the binary tensor format.

Batches are plain ``numpy`` arrays of rank 2 (``[n, d]``) or rank 4
(``[n, c, h, w]``). Storage is float32; arithmetic inside the package is
carried out in float64 and cast back at the file boundary.

Tensor file layout (all little-endian)::

    b"LBMT" | rank: u8 | rank x dim: u64 | payload: f32, row-major
"""

from __future__ import annotations

import hashlib
import os
import struct
from typing import Sequence

import numpy as np

from lbm.errors import FormatError, ShapeError

MAGIC = b"LBMT"
_MASK64 = (1 << 64) - 1


def _tag_to_int(tag: int | str) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    digest = hashlib.blake2b(str(tag).encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """Counter-based random stream (Philox 4x64) keyed by a 64-bit seed.

    A stream is single-owner. Work that needs its own randomness takes a
    child from :meth:`split`; children are keyed by hashing the parent seed
    with the tag path, so two different tags never share a key.
    """

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & _MASK64
        self._start = int(counter) & _MASK64
        self._bitgen = np.random.Philox(key=self.seed, counter=[self._start, 0, 0, 0])
        self.gen = np.random.Generator(self._bitgen)

    @property
    def counter(self) -> int:
        return int(self._bitgen.state["state"]["counter"][0])

    def reset(self) -> "RngStream":
        """Return a fresh stream at the original (seed, counter)."""
        return RngStream(self.seed, self._start)

    def split(self, *tags: int | str) -> "RngStream":
        key = tuple(_tag_to_int(t) for t in tags)
        words = np.random.SeedSequence(entropy=self.seed, spawn_key=key).generate_state(2, np.uint32)
        return RngStream(int(words[0]) | (int(words[1]) << 32))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, counter={self.counter})"


def check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if len(shape) not in (2, 4):
        raise ShapeError(f"batch rank must be 2 or 4, got shape {shape}")
    if any(s < 1 for s in shape):
        raise ShapeError(f"all dimensions must be >= 1, got shape {shape}")
    return shape


def check_batch(x: np.ndarray, name: str = "batch") -> np.ndarray:
    """Validate rank, dimensions and finiteness; returns ``x`` unchanged."""
    x = np.asarray(x)
    check_shape(x.shape)
    if not np.all(np.isfinite(x)):
        raise ShapeError(f"{name} contains non-finite values")
    return x


def gaussian_noise(shape: Sequence[int], stream: RngStream) -> np.ndarray:
    """Standard-normal float32 batch drawn from ``stream``."""
    shape = check_shape(shape)
    return stream.gen.standard_normal(shape, dtype=np.float32)


def write_tensor(path: str | os.PathLike, t: np.ndarray) -> None:
    t = np.asarray(t)
    if t.ndim < 1 or t.ndim > 255:
        raise ShapeError(f"cannot serialize rank-{t.ndim} tensor")
    header = MAGIC + struct.pack("<B", t.ndim) + struct.pack(f"<{t.ndim}Q", *t.shape)
    payload = np.ascontiguousarray(t, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_tensor(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic bytes {raw[:4]!r}")
    if len(raw) < 5:
        raise FormatError(f"{path}: missing rank byte")
    rank = raw[4]
    head = 5 + 8 * rank
    if len(raw) < head:
        raise FormatError(f"{path}: truncated shape header")
    shape = struct.unpack(f"<{rank}Q", raw[5:head])
    expected = 4 * int(np.prod(shape, dtype=np.int64))
    if len(raw) - head != expected:
        raise FormatError(
            f"{path}: payload length {len(raw) - head} bytes, shape {shape} needs {expected}"
        )
    return np.frombuffer(raw, dtype="<f4", offset=head).astype(np.float32).reshape(shape)
