import numpy as np
import pytest

from nfm.autodiff import Tensor, grad_check
from nfm.inr import (InrConfig, fourier_features, sample_feature_freqs, siren_forward,
                     siren_init, time_grid)


def _tensor_params(raw):
    return {k: Tensor(v, requires_grad=True) for k, v in raw.items()}


def test_features_at_zero_alternate_sin_cos():
    feats = fourier_features(np.array([0.0]), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(feats, [[0, 1, 0, 1, 0, 1]], atol=1e-15)


def test_zero_frequency_gives_constant_columns():
    tau = np.linspace(-1, 1, 9)
    feats = fourier_features(tau, np.array([0.0]))
    np.testing.assert_allclose(feats[:, 0], 0.0, atol=1e-15)
    np.testing.assert_allclose(feats[:, 1], 1.0, atol=1e-15)


def test_feature_parity():
    tau = np.array([0.3, 0.7])
    freqs = np.array([1.5, -2.25])
    plus, minus = fourier_features(tau, freqs), fourier_features(-tau, freqs)
    np.testing.assert_allclose(minus[:, 0::2], -plus[:, 0::2], atol=1e-15)
    np.testing.assert_allclose(minus[:, 1::2], plus[:, 1::2], atol=1e-15)


def test_time_grid_is_half_open_and_nested():
    g = time_grid(4)
    np.testing.assert_allclose(g, [-1, -0.5, 0, 0.5])
    np.testing.assert_allclose(time_grid(8)[::2], g)


def test_init_bound_matches_closed_form():
    cfg = InrConfig(h0=8, out_dim=4, hidden=32, w0=1.0)
    rng = np.random.default_rng(0)
    params = siren_init(cfg, rng)
    # fan_in = 32 at the last two layers: bound sqrt(6/32) ~ 0.433
    bound = np.sqrt(6.0 / 32)
    assert np.abs(params["w2"]).max() <= bound
    assert np.abs(params["w3"]).max() <= bound
    assert params["w2"].shape == (32, 32) and params["w3"].shape == (32, 4)
    assert np.abs(params["w1"]).max() <= np.sqrt(6.0 / 8)
    for b in ("b1", "b2", "b3"):
        assert np.all(params[b] == 0)


def test_init_deterministic_under_seed():
    cfg = InrConfig(h0=6, out_dim=3)
    a = siren_init(cfg, np.random.default_rng(5))
    b = siren_init(cfg, np.random.default_rng(5))
    for k in a:
        assert np.array_equal(a[k], b[k])


def test_zeroed_final_layer_gives_zero_output():
    cfg = InrConfig(h0=6, out_dim=3, hidden=8, w0=2.0)
    rng = np.random.default_rng(1)
    raw = siren_init(cfg, rng)
    raw["w3"][:] = 0.0
    params = _tensor_params(raw)
    feats = Tensor(fourier_features(time_grid(10), sample_feature_freqs(cfg, rng)))
    out = siren_forward(params, feats, cfg.w0)
    np.testing.assert_allclose(out.data, 0.0, atol=1e-15)


def test_single_query_matches_batched_row():
    cfg = InrConfig(h0=6, out_dim=3, hidden=8)
    rng = np.random.default_rng(2)
    params = _tensor_params(siren_init(cfg, rng))
    freqs = sample_feature_freqs(cfg, rng)
    grid = time_grid(16)
    whole = siren_forward(params, Tensor(fourier_features(grid, freqs)), cfg.w0)
    single = siren_forward(params, Tensor(fourier_features(grid[5:6], freqs)), cfg.w0)
    np.testing.assert_allclose(single.data[0], whole.data[5], atol=1e-12)


def test_forward_gradcheck():
    cfg = InrConfig(h0=4, out_dim=2, hidden=5, w0=2.0, ff_scale=3.0)
    rng = np.random.default_rng(3)
    params = _tensor_params(siren_init(cfg, rng))
    feats = Tensor(fourier_features(time_grid(12), sample_feature_freqs(cfg, rng)))
    w = rng.normal(size=(12, 2))
    import nfm.autodiff as ad

    err = grad_check(lambda: ad.mean(ad.mul(siren_forward(params, feats, cfg.w0), Tensor(w))),
                     list(params.values()))
    assert err < 1e-4


def test_output_smooth_and_finite_over_inits():
    cfg = InrConfig(h0=8, out_dim=4)
    grid = time_grid(64)
    spacing = grid[1] - grid[0]
    for seed in range(10):
        rng = np.random.default_rng(seed)
        params = _tensor_params(siren_init(cfg, rng))
        freqs = sample_feature_freqs(cfg, rng)
        out = siren_forward(params, Tensor(fourier_features(grid, freqs)), cfg.w0).data
        assert np.all(np.isfinite(out))
        slopes = np.abs(np.diff(out, axis=0)) / spacing
        # bounded by total |w| mass times the largest feature frequency
        bound = 2 * np.pi * (np.abs(freqs).max() + 1) * 1e3
        assert slopes.max() < bound


def test_refined_grid_decimates_to_coarse_evaluation():
    cfg = InrConfig(h0=8, out_dim=4)
    rng = np.random.default_rng(7)
    params = _tensor_params(siren_init(cfg, rng))
    freqs = sample_feature_freqs(cfg, rng)
    coarse = siren_forward(params, Tensor(fourier_features(time_grid(32), freqs)), cfg.w0)
    fine = siren_forward(params, Tensor(fourier_features(time_grid(64), freqs)), cfg.w0)
    np.testing.assert_allclose(fine.data[::2], coarse.data, atol=1e-12)


def test_h0_must_be_even():
    with pytest.raises(ValueError, match="even"):
        InrConfig(h0=5, out_dim=2)
