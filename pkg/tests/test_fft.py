import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from matern4d import fft, oracles
from matern4d import simulator as sim
from matern4d.model import ModelPair
from matern4d.taper import FreqLattice, TaperSpec, kernel_factor


def rand_c(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def delta(shape):
    d = np.zeros(shape)
    d[(0,) * 4] = 1.0
    return d


def test_dft_delta_and_constant():
    np.testing.assert_allclose(fft.dft_forward(delta((3, 4, 2, 5))), 1.0)
    out = fft.dft_forward(np.full((3, 3, 3, 3), 2.5))
    assert out[0, 0, 0, 0] == pytest.approx(2.5 * 81)
    out[0, 0, 0, 0] = 0
    assert np.max(np.abs(out)) < 1e-12


def test_dft_matches_direct_sum():
    t = rand_c(np.random.default_rng(0), (3, 3, 3, 3))
    assert np.max(np.abs(fft.dft_forward(t) - oracles.direct_dft(t))) < 1e-12


def test_inverse_round_trip_and_linearity():
    rng = np.random.default_rng(1)
    a, b = rand_c(rng, (4,) * 4), rand_c(rng, (4,) * 4)
    assert np.max(np.abs(fft.dft_inverse(fft.dft_forward(a)) - a)) < 1e-12
    np.testing.assert_allclose(fft.dft_inverse(np.ones((4,) * 4)), delta((4,) * 4), atol=1e-15)
    lhs = fft.dft_inverse(a + b)
    assert np.max(np.abs(lhs - fft.dft_inverse(a) - fft.dft_inverse(b))) < 1e-12


def test_rank_and_finiteness_checks():
    with pytest.raises(ValueError, match="rank-4"):
        fft.dft_forward(np.ones((4, 4)))
    bad = np.ones((2,) * 4)
    bad[0, 0, 0, 1] = np.nan
    with pytest.raises(FloatingPointError):
        fft.dft_forward(bad)


@pytest.mark.parametrize("mode", ["circular", "padded_linear"])
def test_delta_kernel_is_identity(mode):
    s = rand_c(np.random.default_rng(2), (3, 4, 3, 2))
    kshape = s.shape if mode == "circular" else tuple(2 * n - 1 for n in s.shape)
    np.testing.assert_allclose(fft.convolve(s, delta(kshape), mode), s, atol=1e-14)


@pytest.mark.parametrize("mode", ["circular", "padded_linear"])
def test_convolve_matches_direct(mode):
    rng = np.random.default_rng(3)
    s = rand_c(rng, (4,) * 4)
    kshape = (4,) * 4 if mode == "circular" else (7,) * 4
    k = rand_c(rng, kshape)
    assert np.max(np.abs(fft.convolve(s, k, mode) - oracles.direct_convolve(s, k, mode))) < 1e-12


def test_convolve_shape_errors():
    s = np.ones((3,) * 4)
    with pytest.raises(ValueError):
        fft.convolve(s, np.ones((4,) * 4), "circular")
    with pytest.raises(ValueError):
        fft.convolve(s, np.ones((3,) * 4), "padded_linear")
    with pytest.raises(ValueError):
        fft.convolve(s, s, "wrap")


@pytest.mark.parametrize("mode", ["circular", "padded_linear"])
def test_separable_matches_full_convolution(mode):
    rng = np.random.default_rng(4)
    s = rand_c(rng, (5,) * 4)
    n_f = 5 if mode == "circular" else 9
    factors = [rng.standard_normal(n_f) for _ in range(4)]
    full = np.einsum("a,b,c,d->abcd", *factors)
    np.testing.assert_allclose(fft.convolve_separable(s, factors, mode), fft.convolve(s, full, mode),
                               atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    re=hnp.arrays(float, (3, 3, 3, 3), elements=st.floats(-10, 10)),
    im=hnp.arrays(float, (3, 3, 3, 3), elements=st.floats(-10, 10)),
)
def test_hermitian_preserved_by_even_kernel(re, im):
    t = re + 1j * im
    neg = lambda a: np.roll(np.flip(a), 1, axis=(0, 1, 2, 3))  # noqa: E731
    herm = 0.5 * (t + np.conj(neg(t)))
    k = np.abs(np.random.default_rng(0).standard_normal((3,) * 4))
    k = 0.5 * (k + neg(k))
    out = fft.convolve(herm, k, "circular")
    scale = max(1.0, float(np.max(np.abs(out))))
    assert np.max(np.abs(neg(out) - np.conj(out))) <= 1e-10 * scale


@pytest.mark.xfail(strict=True, reason="at M=8 the two modes differ by about 16% of max|X|")
def test_circular_close_to_padded_linear_at_M8():
    lat, taper = FreqLattice(8, 2), TaperSpec()
    pair = ModelPair.matched(1.0, 1.0, 2.0, 1.5)
    rng = sim.replicate_rng(0, 1, 0)
    Z = sim.spectral_field(sim.draw_hermitian(lat, rng), pair.model1, lat)
    circ = sim.localized_coeffs(Z, lat, taper, "circular")
    lin = sim.localized_coeffs(Z, lat, taper, "padded_linear")
    assert np.max(np.abs(circ - lin)) / np.max(np.abs(lin)) < 1e-4


def test_kernel_factor_matches_storage_convention():
    lat, taper = FreqLattice(3, 2), TaperSpec()
    f = kernel_factor(lat, taper, "padded_linear")
    T = fft.factor_matrix(f, lat.side, "padded_linear")
    assert T[5, 0] == f[5] and T[0, 5] == f[-5]
