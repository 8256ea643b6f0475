"""Coordinate network mapping time locations to feature vectors.

A fixed random Fourier-feature encoding feeds a small sine-activated MLP
(three layers, linear head).  The feature frequencies are sampled once at
init and kept frozen; only the MLP weights train.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass(frozen=True)
class InrConfig:
    h0: int                 # Fourier-feature width (even: sin/cos pairs)
    out_dim: int
    hidden: int = 32
    w0: float = 30.0        # sine frequency constant
    ff_scale: float = 128.0  # std of the random feature frequencies

    def __post_init__(self):
        if self.h0 % 2 != 0 or self.h0 < 2:
            raise ValueError(f"h0 must be even and >= 2, got {self.h0}")
        if self.hidden < 1 or self.out_dim < 1:
            raise ValueError("layer widths must be >= 1")


def time_grid(n_points: int) -> np.ndarray:
    """Equidistant query locations on the half-open interval [-1, 1).

    Half-open spacing 2/L makes a refined grid contain the coarse one:
    time_grid(2L)[::2] == time_grid(L).
    """
    return np.arange(n_points) * (2.0 / n_points) - 1.0


def sample_feature_freqs(cfg: InrConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(0.0, cfg.ff_scale, size=cfg.h0 // 2)


def fourier_features(tau: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Interleaved [sin(2*pi*a_i*tau), cos(2*pi*a_i*tau)] columns, shape [L, h0]."""
    angles = 2.0 * np.pi * np.outer(tau, freqs)
    out = np.empty((tau.shape[0], 2 * freqs.shape[0]))
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out


def siren_init(cfg: InrConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform(-sqrt(6/fan_in)/w0, +sqrt(6/fan_in)/w0) weights, zero biases."""
    widths = [cfg.h0, cfg.hidden, cfg.hidden, cfg.out_dim]
    params = {}
    for layer, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:]), start=1):
        bound = np.sqrt(6.0 / fan_in) / cfg.w0
        params[f"w{layer}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"b{layer}"] = np.zeros(fan_out)
    return params


def siren_forward(params: dict[str, Tensor], feats: Tensor, w0: float) -> Tensor:
    """Evaluate the network on pre-encoded features [L, h0] -> [L, out_dim]."""
    h = ad.sin(ad.scale(ad.affine(feats, params["w1"], params["b1"]), w0))
    h = ad.sin(ad.scale(ad.affine(h, params["w2"], params["b2"]), w0))
    return ad.affine(h, params["w3"], params["b3"])
