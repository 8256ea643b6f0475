"""Fourier-domain time-series modeling with learned frequency tokens and
implicit neural Fourier filters."""

from .autodiff import Tensor, grad_check, no_grad
from .freqops import ExtensionFactors, decimate, extend_spectrum, sinc_resample
from .layers import NFM, ModelConfig, param_count
from .optim import Adam, cosine_lr
from .spectral import SeriesBatch, Spectrum, irfft, naive_dft, rfft
from .tasks import TaskSpec, anomaly_loss, focal_freq_loss, forecast_loss

__version__ = "0.1.0"

__all__ = [
    "Adam", "ExtensionFactors", "ModelConfig", "NFM", "SeriesBatch", "Spectrum",
    "TaskSpec", "Tensor", "anomaly_loss", "cosine_lr", "decimate", "extend_spectrum",
    "focal_freq_loss", "forecast_loss", "grad_check", "irfft", "naive_dft", "no_grad",
    "param_count", "rfft", "sinc_resample", "__version__",
]
