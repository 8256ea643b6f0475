"""Data sources: synthetic generators, CSV ingestion, windowing, splits.

The class-signal generator composes band-limited sinusoids: each class owns
a fixed set of S frequencies (with fixed amplitudes) drawn once from the
class band, and every sample adds R random frequencies from the whole
usable spectrum plus Gaussian noise.  Labels are therefore encoded purely
in the band structure.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 10
    n_class_freqs: int = 20      # S: fixed per-class components
    n_random_freqs: int = 40     # R: per-sample components
    n_time: int = 2000
    band: tuple[int, int] = (320, 590)
    noise_std: float = 0.1
    samples_per_class: int = 100
    amp_range: tuple[float, float] = (0.0, 1.0)
    phase: float = 0.0           # constant phase for every component

    @property
    def f_nyquist(self) -> int:
        return self.n_time // 2

    def __post_init__(self):
        lo, hi = self.band
        if not (1 <= lo <= hi):
            raise ValueError(f"bad class band {self.band}")
        if hi >= self.f_nyquist:
            raise ValueError(f"class band {self.band} reaches past Nyquist {self.f_nyquist}")
        if self.n_class_freqs > hi - lo + 1:
            raise ValueError("class band too narrow for the requested component count")


def synth_generate(spec: SynthSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Generate ``[K*M, N, 1]`` class signals and integer labels."""
    tau = np.arange(spec.n_time) / spec.n_time
    lo, hi = spec.band
    a_lo, a_hi = spec.amp_range
    class_freqs = np.stack([
        rng.choice(np.arange(lo, hi + 1), size=spec.n_class_freqs, replace=False)
        for _ in range(spec.n_classes)
    ])
    class_amps = rng.uniform(a_lo, a_hi, size=(spec.n_classes, spec.n_class_freqs))
    signals = np.empty((spec.n_classes * spec.samples_per_class, spec.n_time, 1))
    labels = np.repeat(np.arange(spec.n_classes), spec.samples_per_class)
    row = 0
    for k in range(spec.n_classes):
        base = (class_amps[k][:, None] * np.sin(
            2 * np.pi * class_freqs[k][:, None] * tau[None, :] + spec.phase)).sum(axis=0)
        for _ in range(spec.samples_per_class):
            extra = np.zeros(spec.n_time)
            if spec.n_random_freqs:
                freqs = rng.integers(1, spec.f_nyquist + 1, size=spec.n_random_freqs)
                amps = rng.uniform(a_lo, a_hi, size=spec.n_random_freqs)
                extra = (amps[:, None] * np.sin(
                    2 * np.pi * freqs[:, None] * tau[None, :] + spec.phase)).sum(axis=0)
            noise = rng.normal(0.0, spec.noise_std, size=spec.n_time) if spec.noise_std else 0.0
            signals[row, :, 0] = base + extra + noise
            row += 1
    return signals, labels


def sinusoid_series(length: int, freqs, amps, phases, noise_std: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Long single-channel series: sum of sinusoids plus Gaussian noise, [T, 1].

    ``freqs`` are in cycles per sample.
    """
    t = np.arange(length)
    x = np.zeros(length)
    for f, a, p in zip(freqs, amps, phases):
        x += a * np.sin(2 * np.pi * f * t + p)
    if noise_std:
        x += rng.normal(0.0, noise_std, size=length)
    return x[:, None]


def spike_anomaly_series(n_train: int, n_test: int, anomaly_rate: float,
                         rng: np.random.Generator, spike_scale: float = 6.0,
                         noise_std: float = 0.05) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Clean training series plus a test series with injected point spikes.

    Returns (train [T1, 1], test [T2, 1], test_labels [T2]).
    """
    freqs = (1 / 25, 1 / 50, 1 / 100)
    amps = (1.0, 0.6, 0.4)
    phases = (0.0, 0.9, 1.7)
    train = sinusoid_series(n_train, freqs, amps, phases, noise_std, rng)
    test = sinusoid_series(n_test, freqs, amps, phases, noise_std, rng)
    labels = np.zeros(n_test, dtype=np.int64)
    n_anom = max(1, int(round(anomaly_rate * n_test)))
    positions = rng.choice(n_test, size=n_anom, replace=False)
    signs = rng.choice([-1.0, 1.0], size=n_anom)
    scale = float(train.std())
    test[positions, 0] += signs * spike_scale * scale * (1.0 + 0.3 * rng.random(n_anom))
    labels[positions] = 1
    return train, test, labels


# ---------------------------------------------------------------------------
# CSV ingestion and windowing


def load_csv(path, columns: list[str] | None = None) -> tuple[np.ndarray, list[str]]:
    """Read a headered CSV into a [T, c] float array.

    The first column is treated as a timestamp and skipped when it does not
    parse as a number.  ``columns`` optionally restricts (and orders) the
    channel columns by header name.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    first_is_timestamp = False
    try:
        float(rows[0][0])
    except ValueError:
        first_is_timestamp = True
    names = header[1:] if first_is_timestamp else header
    offset = 1 if first_is_timestamp else 0
    if columns is not None:
        missing = [c for c in columns if c not in names]
        if missing:
            raise ValueError(f"{path}: unknown columns {missing}; available {names}")
        picks = [names.index(c) + offset for c in columns]
        names = list(columns)
    else:
        picks = list(range(offset, len(header)))
    out = np.empty((len(rows), len(picks)))
    for i, row in enumerate(rows):
        for j, col in enumerate(picks):
            try:
                out[i, j] = float(row[col])
            except (ValueError, IndexError):
                raise ValueError(
                    f"{path}: non-numeric cell at row {i + 2}, column {header[col]!r}"
                ) from None
    return out, names


def make_windows(series: np.ndarray, n: int, horizon: int, stride: int) -> np.ndarray:
    """Slide a window of n + horizon points over [T, c]; returns [num, n+horizon, c].

    Covers every admissible start index exactly once: num = (T - n - horizon)//stride + 1.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    total = n + horizon
    t = series.shape[0]
    if total > t:
        raise ValueError(f"window of {total} points does not fit series of length {t}")
    starts = np.arange(0, t - total + 1, stride)
    return np.stack([series[s:s + total] for s in starts])


def chrono_split(series: np.ndarray, ratios: tuple[float, ...]) -> list[np.ndarray]:
    """Split [T, c] chronologically by cumulative ratios (no overlap)."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    t = series.shape[0]
    bounds = [0] + [int(round(t * r)) for r in np.cumsum(ratios[:-1])] + [t]
    return [series[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])]


@dataclass
class Standardizer:
    mu: np.ndarray
    sigma: np.ndarray

    @classmethod
    def fit(cls, train: np.ndarray) -> "Standardizer":
        mu = train.mean(axis=0, keepdims=True)
        sigma = train.std(axis=0, keepdims=True)
        sigma = np.where(sigma < 1e-12, 1.0, sigma)
        return cls(mu=mu, sigma=sigma)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mu) / self.sigma

    def invert(self, x: np.ndarray) -> np.ndarray:
        return x * self.sigma + self.mu


@dataclass
class WindowDataset:
    """Windows plus targets for one split."""

    windows: np.ndarray                 # [num, N(+H), c]
    targets: np.ndarray | None          # labels [num] or None (self-supervised)
    split: str = "train"
    meta: dict = field(default_factory=dict)

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]


# ---------------------------------------------------------------------------
# cache: one flat binary file + JSON sidecar


def save_cache(path, arrays: dict[str, np.ndarray], extra: dict | None = None):
    """Write arrays back to back into ``path`` with a ``path + '.json'`` sidecar."""
    path = Path(path)
    sections = []
    offset = 0
    with path.open("wb") as fh:
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr)
            fh.write(arr.tobytes())
            sections.append({
                "name": name,
                "offset": offset,
                "shape": list(arr.shape),
                "dtype": str(arr.dtype),
            })
            offset += arr.nbytes
    sidecar = {"format": "nfm-cache-v1", "sections": sections, "extra": extra or {}}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2))


def load_cache(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    if sidecar.get("format") != "nfm-cache-v1":
        raise ValueError(f"{path}: unknown cache format")
    blob = path.read_bytes()
    arrays = {}
    for sec in sidecar["sections"]:
        dtype = np.dtype(sec["dtype"])
        count = int(np.prod(sec["shape"])) if sec["shape"] else 1
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=sec["offset"])
        arrays[sec["name"]] = arr.reshape(sec["shape"]).copy()
    return arrays, sidecar.get("extra", {})
