from fractions import Fraction

import numpy as np
import pytest

from nfm.freqops import ExtensionFactors, decimate, extend_spectrum, sinc_resample
from nfm.spectral import Spectrum, irfft, naive_dft, rfft


def test_zero_padding_case():
    # N=4, m_tau=1, m_f=2: pure zero-padding with amplitude scale 2
    spec = rfft([1.0, 2.0, 0.5, -1.0])
    a, b, c = spec.data
    out = extend_spectrum(spec, ExtensionFactors(Fraction(1), Fraction(2)))
    assert out.n_time == 8
    np.testing.assert_allclose(out.data, [2 * a, 2 * b, 2 * c, 0, 0], atol=1e-12)


def test_identity_factors():
    rng = np.random.default_rng(0)
    spec = rfft(rng.normal(size=10))
    out = extend_spectrum(spec, ExtensionFactors(Fraction(1), Fraction(1)))
    np.testing.assert_allclose(out.data, spec.data, atol=0)


def test_interleaving_case_matches_full_dft_oracle():
    # N=2, m_tau=2: X=[3,-1] -> [6,0,-2]; in time: [1,2] -> [1,2,1,2]
    spec = rfft([1.0, 2.0])
    np.testing.assert_allclose(spec.data, [3, -1], atol=1e-12)
    out = extend_spectrum(spec, ExtensionFactors(Fraction(2), Fraction(1)))
    np.testing.assert_allclose(out.data, [6, 0, -2], atol=1e-12)
    np.testing.assert_allclose(irfft(out), [1, 2, 1, 2], atol=1e-12)
    # same result from the literal full-spectrum interleaving oracle
    full = naive_dft([1.0, 2.0])
    interleaved = np.zeros(4, dtype=complex)
    interleaved[::2] = 2 * full
    np.testing.assert_allclose(np.fft.ifft(interleaved).real, [1, 2, 1, 2], atol=1e-12)


def test_incompatible_factors_rejected():
    spec = rfft(np.ones(5))
    with pytest.raises(ValueError, match="incompatible factors"):
        extend_spectrum(spec, ExtensionFactors(Fraction(1), Fraction(1, 2) * 3))


def test_factors_below_one_rejected():
    with pytest.raises(ValueError, match=">= 1"):
        ExtensionFactors(Fraction(1, 2), Fraction(1))


def test_index_map_injective_for_forecast_convention():
    for n, horizon in [(128, 32), (720, 96), (720, 719)]:
        f = ExtensionFactors(Fraction(n + horizon, n), Fraction(1))
        idx = f.index_map(n // 2 + 1)
        assert np.unique(idx).size == idx.size


def test_sinc_resample_identity_and_constant():
    rng = np.random.default_rng(1)
    x = rng.normal(size=12)
    np.testing.assert_allclose(sinc_resample(x, 12), x, atol=0)
    for L in (3, 7, 12, 30):
        np.testing.assert_allclose(sinc_resample(np.full(12, 2.5), L), np.full(L, 2.5), atol=1e-12)


def test_sinc_resample_sinusoid_closed_form():
    n, L, f = 16, 32, 3
    x = np.sin(2 * np.pi * f * np.arange(n) / n)
    expected = np.sin(2 * np.pi * f * np.arange(L) / L)
    assert np.abs(sinc_resample(x, L) - expected).max() < 1e-9


def test_extension_equals_sinc_resample():
    # m_tau = 1 extension followed by inverse transform is the same code path
    rng = np.random.default_rng(2)
    for n, m in [(8, 2), (12, 3), (16, 4)]:
        x = rng.normal(size=n)
        via_extend = irfft(extend_spectrum(rfft(x), ExtensionFactors(Fraction(1), Fraction(m))))
        via_resample = sinc_resample(x, m * n)
        np.testing.assert_allclose(via_extend, via_resample, atol=1e-12)


def test_timespan_extension_is_periodic_repetition():
    rng = np.random.default_rng(3)
    for n in (4, 9, 16, 32):
        for m in (2, 3, 4):
            x = rng.normal(size=n)
            out = irfft(extend_spectrum(rfft(x), ExtensionFactors(Fraction(m), Fraction(1))))
            assert np.abs(out - np.tile(x, m)).max() < 1e-9


def test_sinc_resample_composition():
    # band-limited signal: composition of two 2x upsamples equals one 4x
    n = 16
    t = np.arange(n) / n
    x = np.sin(2 * np.pi * 2 * t) + 0.5 * np.cos(2 * np.pi * 5 * t)
    once = sinc_resample(x, 4 * n)
    twice = sinc_resample(sinc_resample(x, 2 * n), 4 * n)
    assert np.abs(once - twice).max() < 1e-9


def test_decimate_inverts_band_limited_upsampling():
    rng = np.random.default_rng(4)
    for n, m in [(16, 2), (20, 4), (32, 3)]:
        x = rng.normal(size=n)
        # kill the Nyquist bin so the signal is strictly band-limited
        spec = rfft(x).data.copy()
        spec[-1] = 0
        x = irfft(Spectrum(spec, n_time=n))
        up = sinc_resample(x, m * n)
        assert np.abs(decimate(up, m) - x).max() < 1e-9


def test_decimate_basic():
    x = np.arange(8.0)
    np.testing.assert_allclose(decimate(x, 2), [0, 2, 4, 6])
    np.testing.assert_allclose(decimate(x, 1), x)
    np.testing.assert_allclose(decimate(x, 4), [0, 4])


def test_decimate_divisibility_error():
    with pytest.raises(ValueError, match="does not divide"):
        decimate(np.arange(10.0), 3)
