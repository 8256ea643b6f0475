"""Task framings: losses, normalization tricks, anomaly scoring and metrics.

Forecasting extends the timespan (m_tau = (N + horizon)/N, m_f = 1),
anomaly detection reconstructs a full sequence from its decimated input
(m_tau = 1, m_f = dr), classification keeps the grid (both 1).  The
composite training loss mixes a pointwise time-domain MSE with a spectral
term: the mean over bins of the complex-difference magnitude between the
half-spectra of prediction and target.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .freqops import ExtensionFactors

NORM_EPS = 1e-5

TASK_KINDS = ("forecast", "classify", "anomaly")
NORM_MODES = ("revin", "mean-only", "none")


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    horizon: int = 0          # forecast
    dr: int = 1               # anomaly downsample factor
    n_classes: int = 0        # classify
    lam: float = 0.5          # time-domain weight in the composite loss
    norm_mode: str = "none"

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.norm_mode not in NORM_MODES:
            raise ValueError(f"unknown norm mode {self.norm_mode!r}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must be in [0, 1]")
        if self.kind == "forecast" and self.horizon < 1:
            raise ValueError("forecast task needs horizon >= 1")
        if self.kind == "anomaly" and self.dr < 1:
            raise ValueError("anomaly task needs dr >= 1")
        if self.kind == "classify" and self.n_classes < 2:
            raise ValueError("classify task needs n_classes >= 2")

    def factors(self, n_input: int) -> ExtensionFactors:
        """Extension factors for a model input of length ``n_input``.

        For anomaly, ``n_input`` is the decimated length (model input).
        The resulting target-index map is injective for any m_tau >= 1;
        asserted here so configs fail fast.
        """
        if self.kind == "forecast":
            f = ExtensionFactors(Fraction(n_input + self.horizon, n_input), Fraction(1))
        elif self.kind == "anomaly":
            f = ExtensionFactors(Fraction(1), Fraction(self.dr))
        else:
            f = ExtensionFactors(Fraction(1), Fraction(1))
        idx = f.index_map(n_input // 2 + 1)
        if np.unique(idx).size != idx.size:
            raise ValueError(f"extension index map not injective for factors {f}")
        return f


# ---------------------------------------------------------------------------
# losses (autodiff graph functions; targets are constants)


def _time_axis(t: Tensor) -> int:
    if t.ndim < 2:
        raise ValueError(f"expected [..., L, c], got shape {t.shape}")
    return t.ndim - 2


def focal_freq_loss(y_hat: Tensor, y: Tensor) -> Tensor:
    """Mean over bins/channels/batch of |rfft(y_hat) - rfft(y)|."""
    if y_hat.shape != y.shape:
        raise ValueError(f"shape mismatch: {y_hat.shape} vs {y.shape}")
    diff = ad.rfft_pair(ad.sub(y_hat, y), axis=_time_axis(y_hat))
    re = ad.slice_(diff, (Ellipsis, 0))
    im = ad.slice_(diff, (Ellipsis, 1))
    return ad.mean(ad.sqrt(ad.mul(re, re) + ad.mul(im, im)))


def composite_loss(y_hat: Tensor, y: Tensor, lam: float) -> Tensor:
    """lam * time-domain MSE + (1 - lam) * spectral term."""
    if y_hat.shape != y.shape:
        raise ValueError(f"shape mismatch: {y_hat.shape} vs {y.shape}")
    diff = ad.sub(y_hat, y)
    mse = ad.mean(ad.mul(diff, diff))
    if lam == 1.0:
        return mse
    fd = focal_freq_loss(y_hat, y)
    if lam == 0.0:
        return fd
    return ad.scale(mse, lam) + ad.scale(fd, 1.0 - lam)


def forecast_loss(y_hat: Tensor, y: Tensor, lam: float = 0.5) -> Tensor:
    """Composite loss over the whole extrapolated sequence (lookback + future)."""
    return composite_loss(y_hat, y, lam)


def anomaly_loss(x_hat: Tensor, x: Tensor, lam: float = 0.5) -> Tensor:
    """Composite reconstruction loss; the spectral term is train-time only
    and plays no part in scoring."""
    return composite_loss(x_hat, x, lam)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    return ad.softmax_cross_entropy(logits, labels)


# ---------------------------------------------------------------------------
# reversible input normalization


@dataclass
class NormStats:
    mode: str
    mu: np.ndarray | None = None      # [B, 1, c]
    sigma: np.ndarray | None = None   # [B, 1, c]


def norm_apply(x: np.ndarray, mode: str) -> tuple[np.ndarray, NormStats]:
    """Per-instance, per-channel normalization of [B, N, c] input windows."""
    if mode not in NORM_MODES:
        raise ValueError(f"unknown norm mode {mode!r}")
    if mode == "none":
        return x, NormStats(mode)
    mu = x.mean(axis=1, keepdims=True)
    if mode == "mean-only":
        return x - mu, NormStats(mode, mu=mu)
    sigma = np.sqrt(x.var(axis=1, keepdims=True) + NORM_EPS)
    return (x - mu) / sigma, NormStats(mode, mu=mu, sigma=sigma)


def norm_invert(y: np.ndarray, stats: NormStats) -> np.ndarray:
    """Undo :func:`norm_apply` over an output grid of any length."""
    if stats.mode == "none":
        return y
    if stats.mode == "mean-only":
        return y + stats.mu
    return y * stats.sigma + stats.mu


def norm_invert_graph(y: Tensor, stats: NormStats) -> Tensor:
    """Graph version of :func:`norm_invert`, so losses see original scale."""
    if stats.mode == "none":
        return y
    mu = Tensor(stats.mu.astype(y.data.dtype))
    if stats.mode == "mean-only":
        return y + mu
    return y * Tensor(stats.sigma.astype(y.data.dtype)) + mu


# ---------------------------------------------------------------------------
# anomaly scoring, thresholding, point adjustment


def anomaly_score(x: np.ndarray, x_hat: np.ndarray) -> np.ndarray:
    """Per-time-step reconstruction error: squared error, mean over channels."""
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    return ((x - x_hat) ** 2).mean(axis=-1)


def threshold_by_ratio(scores_pool: np.ndarray, ratio_pct: float) -> float:
    """Threshold at the (100 - ratio)th percentile of the pooled scores,
    linear interpolation between order statistics."""
    scores_pool = np.asarray(scores_pool).reshape(-1)
    if scores_pool.size == 0:
        raise ValueError("empty score pool")
    return float(np.percentile(scores_pool, 100.0 - ratio_pct, method="linear"))


def point_adjust(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Mark a whole true anomaly segment detected if any point inside fired."""
    pred = np.asarray(pred, dtype=bool).copy()
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    boundaries = np.flatnonzero(np.diff(truth.astype(np.int8)))
    starts = np.concatenate([[0] if truth[0] else [], boundaries[truth[boundaries] == 0] + 1]).astype(int)
    ends = np.concatenate([boundaries[truth[boundaries] == 1] + 1, [truth.size] if truth[-1] else []]).astype(int)
    for lo, hi in zip(starts, ends):
        if pred[lo:hi].any():
            pred[lo:hi] = True
    return pred


def precision_recall_f1(pred: np.ndarray, truth: np.ndarray) -> dict[str, float]:
    """P/R/F1 with the 0/0 cases treated as 0."""
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    tp = float(np.sum(pred & truth))
    fp = float(np.sum(pred & ~truth))
    fn = float(np.sum(~pred & truth))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


def persistence_forecast(lookback: np.ndarray, horizon: int) -> np.ndarray:
    """Last-value baseline: repeat the final lookback sample over the horizon."""
    return np.repeat(lookback[:, -1:, :], horizon, axis=1)
