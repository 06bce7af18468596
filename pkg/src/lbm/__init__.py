"""Latent bridge matching at desk scale.

Train a small drift network to transport samples between paired
distributions along a Brownian-bridge interpolant, then sample with
Euler-Maruyama in a handful of steps.
"""

from lbm.bridge import BridgeSample, drift_target, interpolate, make_bridge_sample, predict_target
from lbm.codec import Codec, decode, encode, parse_codec
from lbm.core import RngStream, gaussian_noise, read_tensor, write_tensor
from lbm.errors import (
    ConfigError,
    DivergenceError,
    FormatError,
    LBMError,
    ScheduleError,
    ShapeError,
    SingularityError,
)
from lbm.model import DriftModel, backward, forward, init_params
from lbm.schedule import TimestepDistribution, inference_grid, parse_timesteps, sample_t

__version__ = "0.1.0"
