"""Fourier-domain manipulation: spectrum extension, sinc resampling, decimation.

The central operation is :func:`extend_spectrum`, which rearranges a half
spectrum of N time points onto the grid of L = N * m_tau * m_f points:
zero-initialize the target, then write ``m_tau * m_f * X[k]`` into slot
``floor(m_tau * k)``.  With m_tau = 1 this is zero-padding (time-domain
sinc interpolation); with integer m_tau and m_f = 1 it is zero-interleaving
(periodic timespan extension).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .spectral import Spectrum, half_spectrum_size, irfft, rfft


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    # floats come from configs; limit_denominator keeps 0.5 etc. exact
    return Fraction(value).limit_denominator(10**9)


@dataclass(frozen=True)
class ExtensionFactors:
    """Timespan ratio m_tau and sampling-rate ratio m_f, both rational >= 1."""

    m_tau: Fraction
    m_f: Fraction

    def __post_init__(self):
        object.__setattr__(self, "m_tau", _as_fraction(self.m_tau))
        object.__setattr__(self, "m_f", _as_fraction(self.m_f))
        if self.m_tau < 1 or self.m_f < 1:
            raise ValueError(f"extension factors must be >= 1, got {self.m_tau}, {self.m_f}")

    @property
    def ratio(self) -> Fraction:
        return self.m_tau * self.m_f

    @property
    def scale(self) -> float:
        return float(self.m_tau * self.m_f)

    def output_length(self, n_time: int) -> int:
        length = self.ratio * n_time
        if length.denominator != 1:
            raise ValueError(
                f"incompatible factors: N={n_time} with m_tau={self.m_tau}, m_f={self.m_f} "
                f"gives non-integral L={length}"
            )
        return int(length)

    def index_map(self, n_bins: int) -> np.ndarray:
        """Target bin floor(m_tau * k) for each source bin k, exact arithmetic."""
        k = np.arange(n_bins, dtype=np.int64)
        return (k * self.m_tau.numerator) // self.m_tau.denominator


def identity_factors() -> ExtensionFactors:
    return ExtensionFactors(Fraction(1), Fraction(1))


def extend_spectrum(spec: Spectrum, factors: ExtensionFactors) -> Spectrum:
    """Rearrange a half spectrum onto the L = N*m_tau*m_f grid.

    Writes proceed in ascending k, so for (hypothetical) colliding target
    indices the last write wins; for m_tau >= 1 the map is injective.
    """
    n_out = factors.output_length(spec.n_time)
    k_out = half_spectrum_size(n_out)
    idx = factors.index_map(spec.n_bins)
    out = np.zeros((k_out,) + spec.data.shape[1:], dtype=np.complex128)
    out[idx] = factors.scale * spec.data
    return Spectrum(out, n_time=n_out)


def sinc_resample(x: np.ndarray, n_out: int) -> np.ndarray:
    """Resample along axis 0 to ``n_out`` points by ideal (spectral) methods.

    Upsampling zero-pads the half spectrum with L/N amplitude scaling, i.e.
    band-limited sinc interpolation.  Downsampling truncates to the first
    K_L bins (ideal low-pass) before inverting.
    """
    if n_out < 1:
        raise ValueError("target length must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    n_in = x.shape[0]
    if n_out == n_in:
        return x.copy()
    spec = rfft(x)
    if n_out > n_in:
        factors = ExtensionFactors(Fraction(1), Fraction(n_out, n_in))
        return irfft(extend_spectrum(spec, factors))
    k_out = half_spectrum_size(n_out)
    kept = spec.data[:k_out] * (n_out / n_in)
    if n_out % 2 == 0:
        # the old interior bin landing on the new Nyquist slot must be real
        kept[-1] = kept[-1].real
    return irfft(Spectrum(kept, n_time=n_out))


def decimate(x: np.ndarray, dr: int) -> np.ndarray:
    """Keep every ``dr``-th sample along axis 0; ``dr`` must divide N."""
    x = np.asarray(x)
    if dr < 1:
        raise ValueError("decimation factor must be >= 1")
    if x.shape[0] % dr != 0:
        raise ValueError(f"decimation factor {dr} does not divide length {x.shape[0]}")
    return x[::dr].copy()
