"""Backbone network operating on extended half-spectra.

Data flow: a pointwise input projection lifts each time step to ``d``
features; the frequency-token block (LFT) extends the projected sequence's
spectrum onto the output grid of L points and adds learned spectral tokens;
a stack of mixer blocks then alternates a plain channel MLP with a global
convolution whose filter coefficients come from a coordinate network plus a
per-bin complex MLP (INFF).  A final channel-mixing block closes the
backbone.  Parameter shapes depend only on (c, d, h0, widths), never on the
sequence length or the extension factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .freqops import ExtensionFactors
from .inr import InrConfig, fourier_features, sample_feature_freqs, siren_forward, time_grid

INSTANCE_NORM_EPS = 1e-5
LAYER_NORM_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    c: int = 1                # input channels seen by the backbone
    d: int = 36               # hidden feature width
    n_blocks: int = 1
    h0: int = 32              # Fourier-feature width of the coordinate nets
    w0: float = 30.0
    ff_scale: float = 128.0
    dropout: float = 0.0
    proj_width: int = 0       # sine branch width of the input projection; 0 -> h0
    mlp_hidden: int = 0       # channel-MLP hidden width; 0 -> 2*h0
    inr_hidden: int = 32
    head: str = "pointwise"   # "pointwise" (per-position d -> d_y) or "classify" (pool then d -> d_y)
    d_y: int = 1
    dtype: str = "float64"

    def __post_init__(self):
        if self.proj_width == 0:
            object.__setattr__(self, "proj_width", self.h0)
        if self.mlp_hidden == 0:
            object.__setattr__(self, "mlp_hidden", 2 * self.h0)
        if self.head not in ("pointwise", "classify"):
            raise ValueError(f"unknown head kind {self.head!r}")
        for name in ("c", "d", "n_blocks", "h0", "proj_width", "mlp_hidden", "inr_hidden", "d_y"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.h0 % 2 != 0:
            raise ValueError("h0 must be even")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    def inr_config(self) -> InrConfig:
        return InrConfig(h0=self.h0, out_dim=self.d, hidden=self.inr_hidden,
                         w0=self.w0, ff_scale=self.ff_scale)


@dataclass
class EmbeddingState:
    """Output of the frequency-token block, shared by every mixer block."""

    z0: Tensor           # [B, L, d] time-domain embedding
    z0_freq: Tensor      # [B, K_L, d, 2] spectral embedding
    factors: ExtensionFactors
    length: int


def _param_shapes(cfg: ModelConfig):
    """Yield (name, shape, init) for every trainable array, in fixed order.

    ``init`` is either ("uniform", bound), ("zeros",) or ("ones",).
    """
    inr = cfg.inr_config()

    def siren_shapes(prefix):
        widths = [inr.h0, inr.hidden, inr.hidden, inr.out_dim]
        for layer, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:]), start=1):
            bound = np.sqrt(6.0 / fan_in) / inr.w0
            yield f"{prefix}.w{layer}", (fan_in, fan_out), ("uniform", bound)
            yield f"{prefix}.b{layer}", (fan_out,), ("zeros",)

    pw = cfg.proj_width
    yield "proj.w_l", (cfg.c, cfg.d), ("uniform", 1.0 / np.sqrt(cfg.c))
    yield "proj.w_n1", (cfg.c, pw), ("uniform", np.sqrt(6.0 / cfg.c))
    yield "proj.b_n1", (pw,), ("zeros",)
    yield "proj.w_n2", (2 * pw, cfg.d), ("uniform", 1.0 / np.sqrt(2 * pw))
    yield from siren_shapes("lft.inr")
    for i in range(cfg.n_blocks):
        m = cfg.mlp_hidden
        yield f"block{i}.mlp.w1", (cfg.d, m), ("uniform", 1.0 / np.sqrt(cfg.d))
        yield f"block{i}.mlp.b1", (m,), ("zeros",)
        yield f"block{i}.mlp.w2", (m, cfg.d), ("uniform", 1.0 / np.sqrt(m))
        yield f"block{i}.mlp.b2", (cfg.d,), ("zeros",)
        yield from siren_shapes(f"block{i}.inff.inr")
        for fc in ("fc1", "fc2"):
            bound = 1.0 / np.sqrt(2 * cfg.d)
            yield f"block{i}.inff.{fc}.wr", (cfg.d, cfg.d), ("uniform", bound)
            yield f"block{i}.inff.{fc}.wi", (cfg.d, cfg.d), ("uniform", bound)
            yield f"block{i}.inff.{fc}.br", (cfg.d,), ("zeros",)
            yield f"block{i}.inff.{fc}.bi", (cfg.d,), ("zeros",)
        yield f"block{i}.ln.gamma", (cfg.d,), ("ones",)
        yield f"block{i}.ln.beta", (cfg.d,), ("zeros",)
    m = cfg.mlp_hidden
    yield "final.w1", (cfg.d, m), ("uniform", 1.0 / np.sqrt(cfg.d))
    yield "final.b1", (m,), ("zeros",)
    yield "final.w2", (m, cfg.d), ("uniform", 1.0 / np.sqrt(m))
    yield "final.b2", (cfg.d,), ("zeros",)
    yield "head.w", (cfg.d, cfg.d_y), ("uniform", 1.0 / np.sqrt(cfg.d))
    yield "head.b", (cfg.d_y,), ("zeros",)


def param_count(cfg: ModelConfig) -> int:
    """Exact number of trainable scalars (frozen feature frequencies excluded)."""
    return int(sum(np.prod(shape) for _, shape, _ in _param_shapes(cfg)))


def instance_norm(v: Tensor, eps: float = INSTANCE_NORM_EPS) -> Tensor:
    """Normalize over the time axis (second to last), per channel, no affine."""
    return ad.normalize(v, axis=v.ndim - 2, eps=eps)


def _layer_norm(z: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    return ad.normalize(z, axis=z.ndim - 1, eps=eps) * gamma + beta


def complex_linear(u: Tensor, wr: Tensor, wi: Tensor, br: Tensor, bi: Tensor) -> Tensor:
    """Per-bin complex affine map of a (re, im) pair array [..., d, 2]."""
    return ad.complex_affine(u, wr, wi, br, bi)


class NFM:
    """Backbone plus task head; parameters live in a flat named dict."""

    def __init__(self, cfg: ModelConfig, seed: int):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        dtype = cfg.np_dtype
        self.params: dict[str, Tensor] = {}
        for name, shape, init in _param_shapes(cfg):
            if init[0] == "uniform":
                arr = rng.uniform(-init[1], init[1], size=shape)
            elif init[0] == "ones":
                arr = np.ones(shape)
            else:
                arr = np.zeros(shape)
            self.params[name] = Tensor(arr.astype(dtype), requires_grad=True)
        inr = cfg.inr_config()
        self.consts: dict[str, np.ndarray] = {"lft.freqs": sample_feature_freqs(inr, rng)}
        for i in range(cfg.n_blocks):
            self.consts[f"block{i}.inff.freqs"] = sample_feature_freqs(inr, rng)
        self._feature_cache: dict[tuple[str, int], Tensor] = {}

    # -- parameter plumbing -------------------------------------------------

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def n_params(self) -> int:
        return int(sum(p.data.size for p in self.parameters()))

    def param_vector(self) -> np.ndarray:
        return np.concatenate([p.data.reshape(-1) for p in self.parameters()])

    def load_param_vector(self, vec: np.ndarray):
        offset = 0
        for p in self.parameters():
            n = p.data.size
            p.data = vec[offset:offset + n].reshape(p.data.shape).astype(self.cfg.np_dtype)
            offset += n
        if offset != vec.size:
            raise ValueError(f"parameter vector has {vec.size} entries, model needs {offset}")

    def _const(self, arr) -> Tensor:
        return Tensor(np.asarray(arr, dtype=self.cfg.np_dtype))

    def _features(self, site: str, length: int) -> Tensor:
        key = (site, length)
        cached = self._feature_cache.get(key)
        if cached is None:
            feats = fourier_features(time_grid(length), self.consts[f"{site}.freqs"])
            cached = self._const(feats)
            self._feature_cache[key] = cached
        return cached

    def _sub(self, prefix: str) -> dict[str, Tensor]:
        cut = len(prefix) + 1
        return {k[cut:]: v for k, v in self.params.items() if k.startswith(prefix + ".")}

    # -- layers --------------------------------------------------------------

    def input_projection(self, x: Tensor, train: bool, rng) -> Tensor:
        """Pointwise lift [B, N, c] -> [B, N, d]: linear branch plus a
        sine/cosine-activated branch, matching the coordinate nets' flavor."""
        if x.shape[-1] != self.cfg.c:
            raise ValueError(f"input has {x.shape[-1]} channels, model expects {self.cfg.c}")
        p = self.params
        linear = x @ p["proj.w_l"]
        pre = ad.affine(x, p["proj.w_n1"], p["proj.b_n1"])
        feats = ad.concat([ad.sin(pre), ad.cos(pre)], axis=-1)
        out = linear + feats @ p["proj.w_n2"]
        if train and self.cfg.dropout > 0:
            out = ad.dropout(out, self.cfg.dropout, rng)
        return out

    def lft_block(self, xbar: Tensor, factors: ExtensionFactors) -> EmbeddingState:
        """Extend the projected sequence's spectrum to the output grid and
        add learned frequency tokens; tokens are shared across the batch."""
        n_in = xbar.shape[1]
        length = factors.output_length(n_in)
        k_out = length // 2 + 1
        idx = factors.index_map(n_in // 2 + 1)
        tokens_time = siren_forward(self._sub("lft.inr"), self._features("lft", length), self.cfg.w0)
        tokens = ad.rfft_pair(instance_norm(tokens_time), axis=0)
        spec_in = ad.rfft_pair(xbar, axis=1)
        extended = ad.spectral_extend(spec_in, idx, factors.scale, k_out, axis=1)
        z0_freq = extended + tokens
        z0 = ad.irfft_pair(z0_freq, n=length, axis=1)
        return EmbeddingState(z0=z0, z0_freq=z0_freq, factors=factors, length=length)

    def inff(self, z: Tensor, state: EmbeddingState, block: int,
             collect: list | None = None) -> Tensor:
        """Global convolution with instance- and bin-adaptive filter."""
        sub = self._sub(f"block{block}.inff")
        site = f"block{block}.inff"
        phi = siren_forward({k[4:]: v for k, v in sub.items() if k.startswith("inr.")},
                            self._features(site, state.length), self.cfg.w0)
        conditioned = instance_norm(phi + state.z0)
        coeffs = ad.rfft_pair(conditioned, axis=1)
        h = complex_linear(coeffs, sub["fc1.wr"], sub["fc1.wi"], sub["fc1.br"], sub["fc1.bi"])
        h = ad.relu(h)
        filt = complex_linear(h, sub["fc2.wr"], sub["fc2.wi"], sub["fc2.br"], sub["fc2.bi"])
        if collect is not None:
            mag = np.sqrt(filt.data[..., 0] ** 2 + filt.data[..., 1] ** 2)
            collect.append(mag.mean(axis=0) if mag.ndim == 3 else mag)
        return ad.irfft_pair(ad.complex_mul(filt, ad.rfft_pair(z, axis=1)), n=state.length, axis=1)

    def channel_mlp(self, z: Tensor, prefix: str, train: bool, rng) -> Tensor:
        p = self.params
        h = ad.relu(ad.affine(z, p[f"{prefix}.w1"], p[f"{prefix}.b1"]))
        if train and self.cfg.dropout > 0:
            h = ad.dropout(h, self.cfg.dropout, rng)
        return ad.affine(h, p[f"{prefix}.w2"], p[f"{prefix}.b2"])

    def mixer_block(self, z: Tensor, state: EmbeddingState, block: int, train: bool, rng,
                    collect: list | None = None) -> Tensor:
        mixed = self.channel_mlp(z, f"block{block}.mlp", train, rng)
        mixed = self.inff(mixed, state, block, collect=collect)
        return _layer_norm(z + mixed, self.params[f"block{block}.ln.gamma"],
                           self.params[f"block{block}.ln.beta"])

    def backbone(self, x: Tensor, factors: ExtensionFactors, train: bool = False, rng=None,
                 collect_filters: list | None = None) -> tuple[Tensor, EmbeddingState]:
        """[B, N, c] -> [B, L, d] with L = N * m_tau * m_f."""
        xbar = self.input_projection(x, train, rng)
        state = self.lft_block(xbar, factors)
        z = state.z0
        for i in range(self.cfg.n_blocks):
            z = self.mixer_block(z, state, i, train, rng, collect=collect_filters)
        z = self.channel_mlp(z, "final", train, rng)
        return z, state

    def head(self, z: Tensor) -> Tensor:
        p = self.params
        if self.cfg.head == "classify":
            return ad.affine(ad.mean(z, axis=1), p["head.w"], p["head.b"])
        return ad.affine(z, p["head.w"], p["head.b"])

    def forward(self, x: np.ndarray, factors: ExtensionFactors, train: bool = False, rng=None,
                collect_filters: list | None = None) -> Tensor:
        """Convenience wrapper: numpy input through backbone and head."""
        xt = self._const(x)
        z, _ = self.backbone(xt, factors, train=train, rng=rng, collect_filters=collect_filters)
        return self.head(z)

    def filter_magnitudes(self, x: np.ndarray, factors: ExtensionFactors) -> list[np.ndarray]:
        """Per-block batch-averaged |filter| arrays of shape [K_L, d]."""
        collected: list[np.ndarray] = []
        with ad.no_grad():
            self.forward(x, factors, collect_filters=collected)
        return collected


def clone_config(cfg: ModelConfig, **changes) -> ModelConfig:
    return replace(cfg, **changes)
