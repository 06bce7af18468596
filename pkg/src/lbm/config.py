"""Run configuration: flat ``key=value`` files, presets and CLI overrides.

Resolution order is defaults -> preset -> config file -> command-line flags.
The preset may itself be named in the file or on the command line.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields
from typing import Optional

from lbm.codec import Codec, parse_codec
from lbm.data import PairedTask, parse_task
from lbm.errors import ConfigError
from lbm.schedule import parse_timesteps
from lbm.train import CropPolicy, TrainConfig

# sigma / lambda / timestep law per task family, iteration counts scaled to desk size
PRESETS: dict[str, dict[str, str]] = {
    "object-removal-analog": {"sigma": "0.05", "lambda": "10", "pixel_loss": "l2", "timesteps": "discrete:4"},
    "depth-analog": {
        "sigma": "0.005",
        "lambda": "50",
        "pixel_loss": "l2",
        "timesteps": "weighted:0@0.9,0.25@0.025,0.5@0.05,0.75@0.025",
    },
    "normal-analog": {
        "sigma": "0.1",
        "lambda": "50",
        "pixel_loss": "l1",
        "timesteps": "weighted:0@0.8,0.25@0.05,0.5@0.1,0.75@0.05",
    },
    "relight-analog": {"sigma": "0.01", "lambda": "10", "pixel_loss": "l2", "timesteps": "discrete:4"},
}

_ALIASES = {"lambda": "lam"}


@dataclass
class RunConfig:
    task: str = "gauss1d:0,1,2,1"
    codec: str = "identity"
    hidden: str = "128,128"
    sigma: float = 0.05
    lam: float = 0.0
    pixel_loss: str = "none"
    crop_threshold: int = 8
    crop_size: int = 8
    timesteps: str = "discrete:4"
    optimizer: str = "adamw"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    iterations: int = 5000
    batch_size: int = 256
    steps: int = 4
    n_eval: int = 2000
    seed: int = 0
    sample_seed: int = 1
    out: str = "runs/default"
    checkpoint: str = ""
    oracle_n: int = 1_000_000
    preset: str = ""
    explicit: frozenset = field(default=frozenset(), compare=False, repr=False)

    # --- derived objects ---------------------------------------------------

    def task_obj(self) -> PairedTask:
        return parse_task(self.task)

    def codec_obj(self) -> Codec:
        return parse_codec(self.codec)

    def hidden_widths(self) -> tuple[int, ...]:
        try:
            widths = tuple(int(w) for w in self.hidden.split(",") if w.strip())
        except ValueError as exc:
            raise ConfigError(f"hidden: expected comma-separated integers, got {self.hidden!r}") from exc
        if any(w < 1 for w in widths):
            raise ConfigError(f"hidden widths must be positive, got {self.hidden!r}")
        return widths

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            sigma=self.sigma,
            lam=self.lam,
            pixel_loss=self.pixel_loss,
            crop=CropPolicy(self.crop_threshold, self.crop_size),
            timesteps=parse_timesteps(self.timesteps),
            optimizer=self.optimizer,
            lr=self.lr,
            betas=(self.beta1, self.beta2),
            weight_decay=self.weight_decay,
            iterations=self.iterations,
            batch_size=self.batch_size,
            seed=self.seed,
        )

    def checkpoint_path(self) -> str:
        return self.checkpoint or os.path.join(self.out, "checkpoint.lbmt")

    def validate(self) -> "RunConfig":
        self.task_obj()
        self.codec_obj()
        self.hidden_widths()
        self.train_config()
        if self.optimizer not in ("adamw", "sgd"):
            raise ConfigError(f"optimizer must be adamw or sgd, got {self.optimizer!r}")
        if self.steps < 1 or self.n_eval < 2 or self.oracle_n < 1:
            raise ConfigError("steps must be >= 1, n_eval >= 2 and oracle_n >= 1")
        return self

    def with_values(self, **kv) -> "RunConfig":
        return dataclasses.replace(self, **kv)

    def to_text(self) -> str:
        lines = ["# resolved configuration"]
        for f in fields(self):
            if f.name in ("explicit", "preset"):
                continue
            key = "lambda" if f.name == "lam" else f.name
            lines.append(f"{key}={format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


_TYPES = {f.name: f.type for f in fields(RunConfig) if f.name != "explicit"}


def _coerce(key: str, raw: str, where: str):
    name = _ALIASES.get(key, key)
    if name not in _TYPES:
        known = ", ".join(sorted(k if k != "lam" else "lambda" for k in _TYPES))
        raise ConfigError(f"{where}: unknown key {key!r} (known keys: {known})")
    kind = _TYPES[name]
    try:
        if kind == "int":
            return name, int(raw)
        if kind == "float":
            return name, float(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: {key} expects {kind}, got {raw!r}") from exc
    return name, raw.strip()


def parse_pairs(text: str, source: str = "<config>") -> dict[str, object]:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        name, val = _coerce(key, value, f"{source}:{lineno}")
        out[name] = val
    return out


def read_config_file(path: str) -> dict[str, object]:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_pairs(fh.read(), path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def parse_flags(tokens: list[str]) -> dict[str, object]:
    """Turn ``--key=value`` (or ``--key value``) tokens into typed overrides."""
    out: dict[str, object] = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}; use --key=value")
        body = tok[2:]
        if "=" in body:
            key, value = body.split("=", 1)
        elif i + 1 < len(tokens):
            key, value = body, tokens[i + 1]
            i += 1
        else:
            raise ConfigError(f"flag {tok} is missing a value")
        name, val = _coerce(key.replace("-", "_"), value, f"flag --{key}")
        out[name] = val
        i += 1
    return out


def resolve(file_values: Optional[dict] = None, flag_values: Optional[dict] = None) -> RunConfig:
    file_values = dict(file_values or {})
    flag_values = dict(flag_values or {})
    preset = str(flag_values.get("preset", file_values.get("preset", "")))
    merged: dict[str, object] = {}
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}")
        for k, v in PRESETS[preset].items():
            name, val = _coerce(k, v, f"preset {preset}")
            merged[name] = val
    merged.update(file_values)
    merged.update(flag_values)
    merged["preset"] = preset
    explicit = frozenset(k for k in merged if k != "preset")
    return RunConfig(**merged, explicit=explicit).validate()
