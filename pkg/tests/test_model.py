import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from matern4d.model import (
    MaternParams,
    ModelPair,
    UnsupportedSmoothnessError,
    covariance,
    delta_analytic,
    delta_analytic_sq,
    delta_leading,
    microergodic,
    spectral_constant,
    spectral_density,
)

pos = st.floats(0.1, 10.0)


def test_microergodic_examples():
    assert microergodic(MaternParams(1.0, 1.0, 1.5)) == pytest.approx(1.0, rel=1e-14)
    assert microergodic(MaternParams(2 ** -1.5, 2.0, 1.5)) == pytest.approx(1.0, rel=1e-14)
    assert microergodic(MaternParams(2.0, 1.0, 0.7)) == pytest.approx(4.0, rel=1e-14)


def test_derived_fields():
    p = MaternParams(1.3, 2.0, 2.5)
    assert p.p == 4.5
    assert p.m == pytest.approx(1.3**2 * 2.0**5)


@pytest.mark.parametrize("field", ["sigma", "alpha", "nu"])
@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_invalid_params(field, bad):
    kw = {"sigma": 1.0, "alpha": 1.0, "nu": 1.5, field: bad}
    with pytest.raises(ValueError, match=field):
        MaternParams(**kw)


@given(m=pos, a1=pos, a2=pos, nu=st.floats(0.2, 4.0))
def test_matched_pair_shares_m(m, a1, a2, nu):
    pair = ModelPair.matched(m, a1, a2, nu)
    assert math.isclose(microergodic(pair.model1), microergodic(pair.model2), rel_tol=1e-12)
    assert math.isclose(pair.model1.m, m, rel_tol=1e-12)


def test_pair_rejects_mixed_nu_and_needs_mismatch():
    with pytest.raises(ValueError):
        ModelPair(MaternParams(1, 1, 1.5), MaternParams(1, 2, 0.5))
    with pytest.raises(ValueError, match="mismatch"):
        ModelPair.matched(1.0, 2.0, 2.0, 1.5).require_mismatch()


def test_spectral_density_examples():
    p = MaternParams(1.0, 1.0, 1.5)
    assert spectral_density(np.zeros(4), p) == pytest.approx(1.0)
    assert spectral_density(np.array([1.0, 1.0, 1.0, 0.0]), p) == pytest.approx(1 / 128, rel=1e-14)
    with pytest.raises(ValueError):
        spectral_density(np.zeros(4), p, mode="bogus")


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.5, 0.7])
def test_normalizing_constant_against_radial_quadrature(nu):
    alpha, sigma = 1.7, 0.9
    p = nu + 2
    # (2 pi)^-4 * |S^3| * int r^3 (alpha^2 + r^2)^-p dr, |S^3| = 2 pi^2
    radial, _ = integrate.quad(lambda r: r**3 * (alpha**2 + r * r) ** (-p), 0, np.inf, epsabs=0, epsrel=1e-13)
    params = MaternParams(sigma, alpha, nu)
    total = spectral_constant(nu) * params.m * 2 * math.pi**2 * radial / (2 * math.pi) ** 4
    assert total == pytest.approx(sigma**2, rel=1e-6)


def test_covariance_examples():
    assert covariance(0.0, MaternParams(1.7, 2.0, 2.5)) == pytest.approx(1.7**2)
    assert covariance(1.0, MaternParams(1.0, 1.0, 0.5)) == pytest.approx(0.3678794, abs=1e-7)
    assert covariance(1.0, MaternParams(1.0, 3.0, 1.5)) == pytest.approx(4 * math.exp(-3), rel=1e-14)
    assert covariance(1.0, MaternParams(1.0, 3.0, 1.5)) == pytest.approx(0.1991483, abs=1e-7)


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
def test_covariance_matches_bessel(nu):
    params = MaternParams(1.2, 1.4, nu)
    h = np.linspace(0.05, 6.0, 40)
    x = params.alpha * h
    ref = params.sigma**2 * 2 ** (1 - nu) / special.gamma(nu) * x**nu * special.kv(nu, x)
    np.testing.assert_allclose(covariance(h, params), ref, rtol=1e-12)


def test_covariance_unsupported_nu():
    with pytest.raises(UnsupportedSmoothnessError):
        covariance(1.0, MaternParams(1.0, 1.0, 0.7))


def test_delta_examples():
    k6 = np.array([6, 0, 0, 0])
    assert delta_analytic(k6, 1, 2, 1.5) == pytest.approx((37 / 40) ** 3.5 - 1, rel=1e-13)
    assert delta_analytic(k6, 1, 2, 1.5) == pytest.approx(-0.23877, abs=5e-5)
    assert delta_leading(k6, 1, 2, 1.5) == pytest.approx(-3.5 * 3 / 36, rel=1e-14)
    k20 = np.array([20, 0, 0, 0])
    assert abs(delta_analytic(k20, 1, 2, 1.5) / delta_leading(k20, 1, 2, 1.5) - 1) < 0.02
    with pytest.raises(ValueError):
        delta_analytic(np.zeros(4), 1, 2, 1.5)


@given(k=st.lists(st.integers(-30, 30), min_size=4, max_size=4).filter(any), a=pos, nu=st.floats(0.2, 4))
def test_delta_zero_for_equal_alpha(k, a, nu):
    assert delta_analytic(np.array(k), a, a, nu) == 0.0
    assert delta_leading(np.array(k), a, a, nu) == 0.0


@given(k_sq=st.integers(1, 10**6), a1=pos, gap=st.floats(0.01, 5), nu=st.floats(0.2, 4))
def test_delta_sign_follows_alpha_order(k_sq, a1, gap, nu):
    a2 = a1 + gap
    assert delta_analytic_sq(k_sq, a1, a2, nu) < 0
    assert delta_analytic_sq(k_sq, a2, a1, nu) > 0


@settings(max_examples=50)
@given(a1=pos, a2=pos)
def test_delta_ratio_tends_to_one(a1, a2):
    if abs(a1 - a2) < 1e-3:
        return
    k = np.array([10**4, 0, 0, 0])
    assert delta_analytic(k, a1, a2, 1.5) / delta_leading(k, a1, a2, 1.5) == pytest.approx(1, rel=1e-3)
