import numpy as np
import pytest

from nfm.spectral import SeriesBatch, Spectrum, irfft, naive_dft, rfft


def test_naive_dft_two_point_impulse():
    np.testing.assert_allclose(naive_dft([1.0, 0.0]), [1 + 0j, 1 + 0j], atol=1e-12)


def test_naive_dft_hand_summed():
    # k=0: 1+2 = 3; k=1: 1 + 2*exp(-j*pi) = -1
    np.testing.assert_allclose(naive_dft([1.0, 2.0]), [3 + 0j, -1 + 0j], atol=1e-12)


def test_naive_dft_constant():
    np.testing.assert_allclose(naive_dft([1.0] * 4), [4, 0, 0, 0], atol=1e-12)


def test_rfft_constant_is_pure_dc():
    spec = rfft([1.0, 1.0, 1.0, 1.0])
    np.testing.assert_allclose(spec.data, [4 + 0j, 0, 0], atol=1e-12)


def test_rfft_unit_impulse_flat():
    spec = rfft([1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(spec.data, [1 + 0j, 1 + 0j, 1 + 0j], atol=1e-12)


def test_rfft_alternating():
    # frozen from the naive_dft oracle
    spec = rfft([0.0, 1.0, 0.0, 1.0])
    np.testing.assert_allclose(spec.data, [2 + 0j, 0 + 0j, -2 + 0j], atol=1e-12)


def test_rfft_matches_naive_dft_all_lengths():
    rng = np.random.default_rng(7)
    for n in range(1, 129):
        x = rng.normal(size=n)
        fast = rfft(x).data
        slow = naive_dft(x)[: n // 2 + 1]
        np.testing.assert_allclose(fast, slow, rtol=1e-10, atol=1e-10 * max(1, np.abs(slow).max()))


def test_irfft_constant_case():
    np.testing.assert_allclose(irfft(Spectrum([4 + 0j, 0, 0], n_time=4)), [1, 1, 1, 1], atol=1e-12)


def test_irfft_alternating_case():
    np.testing.assert_allclose(irfft(Spectrum([2, 0, -2], n_time=4)), [0, 1, 0, 1], atol=1e-12)


def test_roundtrip_identity():
    rng = np.random.default_rng(11)
    for n in range(1, 65):
        x = rng.normal(size=n)
        np.testing.assert_allclose(irfft(rfft(x)), x, atol=1e-10)


def test_roundtrip_multichannel():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(20, 3))
    np.testing.assert_allclose(irfft(rfft(x)), x, atol=1e-12)


def test_parseval():
    rng = np.random.default_rng(5)
    for n in (7, 16, 33, 100):
        x = rng.normal(size=n)
        full = naive_dft(x)
        lhs = np.sum(x**2)
        rhs = np.sum(np.abs(full) ** 2) / n
        assert abs(lhs - rhs) / abs(lhs) < 1e-9


def test_linearity():
    rng = np.random.default_rng(9)
    x, y = rng.normal(size=24), rng.normal(size=24)
    a, b = 2.5, -1.25
    lhs = rfft(a * x + b * y).data
    rhs = a * rfft(x).data + b * rfft(y).data
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_irfft_output_is_real_array():
    rng = np.random.default_rng(13)
    out = irfft(rfft(rng.normal(size=10)))
    assert out.dtype == np.float64


def test_complex_invariants():
    rng = np.random.default_rng(17)
    z = rng.normal(size=8) + 1j * rng.normal(size=8)
    np.testing.assert_allclose(np.conj(np.conj(z)), z)
    assert np.all(np.abs(z) ** 2 >= 0)
    np.testing.assert_allclose(np.abs(z) ** 2, z.real**2 + z.imag**2)


def test_empty_sequence_errors():
    with pytest.raises(ValueError, match="empty sequence"):
        rfft(np.array([]))
    with pytest.raises(ValueError, match="empty sequence"):
        naive_dft(np.array([]))


def test_non_realizable_spectrum_rejected():
    bad = Spectrum([1 + 0.5j, 0.2 + 0.1j, 0.3 + 0j], n_time=4)
    with pytest.raises(ValueError, match="non-realizable spectrum"):
        irfft(bad)
    bad_nyquist = Spectrum([1 + 0j, 0.2 + 0.1j, 0.3 + 0.4j], n_time=4)
    with pytest.raises(ValueError, match="non-realizable spectrum"):
        irfft(bad_nyquist)


def test_spectrum_validates_bin_count():
    with pytest.raises(ValueError):
        Spectrum([1 + 0j, 0], n_time=4)


def test_series_batch_defaults_and_invariant():
    batch = SeriesBatch(np.zeros((2, 8, 3)))
    assert batch.f_x == 8 and batch.t_x == 1.0
    assert batch.n_series == 2 and batch.n_time == 8 and batch.n_channels == 3
    with pytest.raises(ValueError, match="inconsistent sampling"):
        SeriesBatch(np.zeros((1, 8, 1)), f_x=3.0, t_x=1.0)
    with pytest.raises(ValueError, match="must be"):
        SeriesBatch(np.zeros((8, 1)))
