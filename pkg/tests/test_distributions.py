import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import dawsn

from sbscatter.distributions import (QuadratureError, TestFunction, bump, bump_profile,
                                     delta_pairing, extrapolate_to_zero, fit_order, fourier,
                                     fourier_transform, gaussian, heaviside_pairing,
                                     hermite_gaussian, inverse_fourier, mollified_pairing,
                                     odd_gaussian, pv_excision, pv_integral, sokhotski_defect,
                                     sokhotski_limit, standard_family)

SQRT_PI = math.sqrt(math.pi)
HALF_GAUSS_TAIL = 0.139402792640331  # int_1^inf e^{-s^2} ds = (sqrt(pi)/2) erfc(1)


def test_test_function_validation():
    with pytest.raises(ValueError):
        TestFunction(np.sin, (1.0, 0.0))
    with pytest.raises(ValueError):
        TestFunction(np.sin, (0.0, 1.0), kind="smooth")
    b = bump(0.0, 1.0)
    assert b.support == (-1.0, 1.0) and b(1.5) == 0 and b(-1.0) == 0
    assert bump_profile(0.0) == 1.0


@pytest.mark.parametrize("x", [0.0, 0.7, 2.5])
def test_gaussian_fourier(x):
    assert fourier(gaussian(), x) == pytest.approx(SQRT_PI * math.exp(-x * x / 4), abs=1e-12)


def test_fourier_shift_and_parity():
    a, x = 0.5, 1.3
    shifted = fourier(gaussian(center=a), x)
    assert shifted == pytest.approx(np.exp(-1j * a * x) * SQRT_PI * math.exp(-x * x / 4), abs=1e-12)
    # s e^{-s^2} is odd: its transform is -i x sqrt(pi)/2 e^{-x^2/4}
    assert fourier(odd_gaussian(), x) == pytest.approx(
        -0.5j * x * SQRT_PI * math.exp(-x * x / 4), abs=1e-12)


def test_fourier_round_trip():
    phi = gaussian(width=0.8)
    v = fourier_transform(phi, (-25.0, 25.0))
    for s in (0.0, 0.4, -1.1):
        assert inverse_fourier(v, s) == pytest.approx(phi(s), abs=1e-8)


def test_heaviside_and_delta():
    assert heaviside_pairing(gaussian(), 1.0) == pytest.approx(HALF_GAUSS_TAIL, rel=1e-12)
    assert heaviside_pairing(gaussian(), 0.0) == pytest.approx(SQRT_PI / 2, rel=1e-12)
    assert heaviside_pairing(bump(0.0, 1.0), 2.0) == 0
    assert delta_pairing(gaussian(center=0.5)) == pytest.approx(math.exp(-0.25))


def test_pv_values():
    assert abs(pv_integral(gaussian())) < 1e-14
    assert pv_integral(odd_gaussian()) == pytest.approx(SQRT_PI, rel=1e-12)
    a = 0.5
    assert pv_integral(gaussian(center=a)) == pytest.approx(2 * SQRT_PI * dawsn(a), rel=1e-10)


def test_pv_excision_converges():
    phi = gaussian(center=0.5)
    exact = pv_integral(phi)
    errs = [abs(pv_excision(phi, eta=eta) - exact) for eta in (1e-2, 1e-3)]
    # symmetric excision leaves 2 eta phi'(0) to leading order
    assert errs[1] == pytest.approx(2e-3 * abs(phi.deriv(0.0)), rel=1e-3)
    assert errs[0] / errs[1] == pytest.approx(10.0, rel=1e-2)


def test_pv_rejects_singular_center():
    phi = TestFunction(lambda s: np.inf if s == 0 else 1.0 / abs(s), (-1.0, 1.0))
    with pytest.raises(ValueError):
        pv_integral(phi, 0.0)


@pytest.mark.parametrize("phi,exact", [
    (gaussian(), math.pi),
    (odd_gaussian(), -1j * SQRT_PI),
    (bump(0.0, 1.0), math.pi),
    (gaussian(center=0.5), math.pi * math.exp(-0.25) - 2j * SQRT_PI * dawsn(0.5)),
])
def test_sokhotski_limit_values(phi, exact):
    assert sokhotski_limit(phi) == pytest.approx(exact, abs=1e-10)


def test_mollified_pairing_rejects_alpha():
    with pytest.raises(ValueError):
        mollified_pairing(gaussian(), 0.0)


@pytest.mark.parametrize("phi", standard_family(), ids=lambda p: p.name)
def test_sokhotski_rate(phi):
    alphas = [0.1, 0.05, 0.025, 0.0125]
    d = [sokhotski_defect(phi, a) for a in alphas]
    assert all(di <= 5 * a for di, a in zip(d, alphas))
    assert fit_order(alphas, d) >= 0.9


def test_gaussian_mollified_closed_form():
    # int e^{-s^2}/(alpha + i s) ds = pi e^{alpha^2} erfc(alpha)
    from scipy.special import erfcx
    for a in (0.1, 0.01):
        assert mollified_pairing(gaussian(), a) == pytest.approx(math.pi * erfcx(a), rel=1e-10)


def test_extrapolation_and_order():
    alphas = np.array([0.1, 0.05, 0.025])
    vals = 2.0 - 1j + 3 * alphas + 0.5 * alphas ** 2
    assert extrapolate_to_zero(alphas, vals) == pytest.approx(2.0 - 1j, abs=1e-12)
    assert fit_order(alphas, 7 * alphas ** 1.5) == pytest.approx(1.5)


def test_hermite_family_pv_parity():
    # even Hermite functions have vanishing PV at 0, odd ones do not
    assert abs(pv_integral(hermite_gaussian(2))) < 1e-12
    assert abs(pv_integral(hermite_gaussian(1))) > 1.0


def test_quadrature_failure_reported():
    wild = TestFunction(lambda s: np.sin(1e6 * s) / np.sqrt(np.abs(s) + 1e-300), (-50.0, 50.0))
    with pytest.raises(QuadratureError):
        fourier(wild, 1e-3)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(0.3, 2.0), st.floats(-3.0, 3.0))
def test_plancherel_style_shift(center, width, x):
    """|F[phi](x)| does not depend on the center of a Gaussian."""
    a = abs(fourier(gaussian(center, width), x))
    b = abs(fourier(gaussian(0.0, width), x))
    assert a == pytest.approx(b, abs=1e-10)
    assert b == pytest.approx(SQRT_PI * width * math.exp(-(width * x) ** 2 / 4), abs=1e-10)
