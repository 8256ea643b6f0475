"""Half-spectrum FFT primitives for real sequences.

Conventions used throughout the package:

* forward transform is unnormalized, the inverse carries the 1/N factor;
* a length-N real sequence maps to K = N//2 + 1 complex bins;
* bin 0 (DC) is real, and for even N the Nyquist bin N/2 is real too.

``rfft``/``irfft`` are thin, checked wrappers over numpy's pocketfft (fast
for arbitrary N, bit-stable for a fixed N).  ``naive_dft`` is the O(N^2)
literal summation kept as an independent correctness oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def half_spectrum_size(n_time: int) -> int:
    """Number of independent bins of a length-``n_time`` real sequence."""
    return n_time // 2 + 1


@dataclass(frozen=True)
class Spectrum:
    """Complex half-spectrum of a real sequence of length ``n_time``.

    ``data`` has shape [K] or [K, d] with K = n_time//2 + 1.
    """

    data: np.ndarray
    n_time: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        object.__setattr__(self, "data", data)
        if self.n_time < 1:
            raise ValueError("n_time must be positive")
        k = half_spectrum_size(self.n_time)
        if data.shape[0] != k:
            raise ValueError(
                f"spectrum has {data.shape[0]} bins, expected {k} for n_time={self.n_time}"
            )

    @property
    def n_bins(self) -> int:
        return self.data.shape[0]

    def realness_violation(self) -> float:
        """Largest imaginary magnitude on bins that must be real (DC, Nyquist)."""
        err = abs(float(np.max(np.abs(self.data[0].imag), initial=0.0)))
        if self.n_time % 2 == 0:
            err = max(err, float(np.max(np.abs(self.data[-1].imag), initial=0.0)))
        return err


@dataclass
class SeriesBatch:
    """Batch of real sequences [B, N, c] with sampling metadata.

    By default the timespan is one unit and the sampling rate equals the
    sequence length, so t_x * f_x == N always holds.
    """

    data: np.ndarray
    f_x: float = 0.0
    t_x: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ValueError(f"series batch must be [B, N, c], got shape {self.data.shape}")
        if self.f_x == 0.0:
            self.f_x = self.n_time / self.t_x
        if abs(self.t_x * self.f_x - self.n_time) > 1e-9 * max(1.0, self.n_time):
            raise ValueError(
                f"inconsistent sampling: t_x*f_x={self.t_x * self.f_x} but N={self.n_time}"
            )

    @property
    def n_series(self) -> int:
        return self.data.shape[0]

    @property
    def n_time(self) -> int:
        return self.data.shape[1]

    @property
    def n_channels(self) -> int:
        return self.data.shape[2]


def rfft(x: np.ndarray) -> Spectrum:
    """Forward transform of a real sequence, keeping the first N//2+1 bins.

    ``x`` is [N] or [N, d]; the transform runs along axis 0.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0 or x.shape[0] == 0:
        raise ValueError("empty sequence")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values in input sequence")
    return Spectrum(np.fft.rfft(x, axis=0), n_time=x.shape[0])


def irfft(spec: Spectrum, rtol: float = 1e-9) -> np.ndarray:
    """Inverse of :func:`rfft`, reconstructing the length-``n_time`` sequence.

    Raises if the DC bin (or the Nyquist bin, for even N) carries an
    imaginary part beyond tolerance: such a half-spectrum cannot come from
    a real sequence.
    """
    scale = max(1.0, float(np.max(np.abs(spec.data), initial=0.0)))
    if spec.realness_violation() > rtol * scale:
        raise ValueError("non-realizable spectrum")
    return np.fft.irfft(spec.data, n=spec.n_time, axis=0)


def naive_dft(x: np.ndarray) -> np.ndarray:
    """Literal O(N^2) discrete Fourier transform, all N bins.

    X[k] = sum_n x[n] exp(-2j*pi*k*n/N).  Slow by design; used as the
    independent oracle for the fast path.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty sequence")
    n = x.shape[0]
    grid = np.arange(n)
    kernel = np.exp(-2j * np.pi * np.outer(grid, grid) / n)
    return kernel @ x
