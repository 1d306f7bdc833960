import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperkpp.dispersion import RegimeError, wave_parameters
from hyperkpp.growth import logistic
from hyperkpp.profile import (
    FrontKind,
    FrontProfile,
    NoFrontError,
    ProfileOptions,
    ShiftConvention,
    build,
    build_hyperbolic,
    build_minimal,
    build_parabolic,
    build_supersonic,
    build_weak_sonic,
    check_front_exists,
    residual,
    tail_rate,
)


def constant_profile(value, params):
    z = np.linspace(-10, 10, 2001)
    nu = np.full_like(z, value)
    return FrontProfile(FrontKind.SMOOTH_PARABOLIC, params, z, nu, np.zeros_like(z),
                        ShiftConvention.HALF_LEVEL_AT_ORIGIN,
                        slope=lambda n: np.zeros_like(n), _dense=lambda q: np.full_like(q, value))


@pytest.mark.parametrize("value", [0.0, 1.0])
def test_equilibria_have_zero_residual(g, value):
    assert residual(constant_profile(value, wave_parameters(0.5, g)), g) == 0.0


def test_parabolic_front_shape(parabolic_front, g):
    p = parabolic_front
    assert p.kind is FrontKind.SMOOTH_PARABOLIC
    assert p(0.0) == pytest.approx(0.5, abs=1e-10)
    assert p.half_level() == 0.0
    assert np.all(np.diff(p.nu) <= 0)
    assert p.nu[0] > 1 - 1e-6 and p.nu[-1] < 1e-6
    assert residual(p, g) < 1e-6
    np.testing.assert_allclose(p.derivative(p.z), p.dnu, atol=1e-12)


def test_parabolic_residual_shrinks_with_dz(g):
    params = wave_parameters(0.5, g)
    loose = ProfileOptions(dz=0.02, residual_tol=None)
    coarse = residual(build_parabolic(params, g, loose), g)
    fine = residual(build_parabolic(params, g, replace(loose, dz=0.01)), g)
    # central differences of an accurate dense solution: second order in dz
    assert fine < coarse / 3


def test_minimal_front_tail_has_double_root_form(parabolic_front):
    # at s* the decay is (A + B z) exp(-lam z): nu exp(lam z) should be linear in z
    p = parabolic_front
    lam = p.params.lam
    assert lam == pytest.approx(5 / 3)
    m = (p.nu > 1e-6) & (p.nu < 1e-3) & (p.z > 0)
    z = p.z[m]

    def nonlinearity(rate):
        w = p.nu[m] * np.exp(rate * z)
        fit = np.polyfit(z, w, 1)
        return np.max(np.abs(np.polyval(fit, z) - w)) / np.max(w), fit[0]

    dev, slope = nonlinearity(lam)
    assert dev < 2e-3 and slope > 0
    for other in (0.9 * lam, 1.1 * lam):
        assert nonlinearity(other)[0] > 5 * dev


def test_fast_front_tail_rate(g):
    params = wave_parameters(0.5, g, 1.8)
    prof = build_parabolic(params, g)
    # slow root of the linearization at 0, computed here from the quadratic
    eps, s = 0.5, 1.8
    a, b = eps**2 * s**2 - 1, (1 - eps**2) * s
    slow = min(r.real for r in np.roots([a, b, -1.0]) if r.real > 0)
    assert tail_rate(prof) == pytest.approx(slow, rel=2e-3)


def test_no_front_below_minimal_speed(g):
    params = wave_parameters(0.5, g, 1.0)
    with pytest.raises(NoFrontError) as info:
        build(params, g)
    assert info.value.discriminant < 0
    with pytest.raises(NoFrontError):
        build(wave_parameters(2.0, g, 0.3), g)


def test_constructor_regime_guards(g):
    with pytest.raises(RegimeError):
        build_parabolic(wave_parameters(2.0, g), g)
    with pytest.raises(RegimeError):
        build_hyperbolic(wave_parameters(0.5, g), g)
    with pytest.raises(RegimeError):
        build_weak_sonic(wave_parameters(0.5, g, 1.8), g)
    with pytest.raises(RegimeError):
        build_supersonic(wave_parameters(0.5, g, 1.8), g)


def test_hyperbolic_front_matches_implicit_solution(hyperbolic_front, g):
    p = hyperbolic_front
    eps = 2.0
    th = p.params.theta
    assert p.kind is FrontKind.DISCONTINUOUS_HYPERBOLIC
    assert p.shift_convention is ShiftConvention.JUMP_AT_ORIGIN
    assert p(0.0) == pytest.approx(th)
    assert np.all(p(np.array([1e-9, 1.0, 50.0])) == 0.0)
    # separating variables in nu' = eps F / (eps^2 F' - 1) for logistic F
    def lhs(nu):
        return (eps**2 - 1) * np.log(nu) + (eps**2 + 1) * np.log1p(-nu)
    m = (p.z < 0) & (p.nu < 1 - 1e-6)
    np.testing.assert_allclose(lhs(p.nu[m]) - lhs(th), eps * p.z[m], atol=1e-7, rtol=0)
    assert np.all(np.diff(p.nu[p.z <= 0]) <= 0)
    assert residual(p, g) < 1e-5


def test_critical_front_closed_form(critical_front):
    p = critical_front
    assert p.kind is FrontKind.CONTINUOUS_CRITICAL
    z = p.z[p.z <= 0]
    np.testing.assert_allclose(p(z), 1 - np.exp(z / 2), atol=1e-10)
    assert p.derivative(np.array([0.0]))[0] == pytest.approx(-0.5)


def test_weak_sonic_front(g):
    params = wave_parameters(0.5, g, 2.0)
    prof = build(params, g)
    assert prof.kind is FrontKind.WEAK_SONIC
    assert prof.derivative(np.array([0.0]))[0] == pytest.approx(-0.125, rel=1e-8)
    assert tail_rate(prof) == pytest.approx(0.5 / 0.75, rel=2e-3)


def test_supersonic_front_and_trapping(g):
    eps, s = math.sqrt(2.0), 1.0
    prof, orbit = build_supersonic(wave_parameters(eps, g, s), g)
    assert prof.kind is FrontKind.SMOOTH_SUPERSONIC
    assert orbit.lam == pytest.approx((1 + math.sqrt(5)) / 2)
    assert orbit.k == pytest.approx(2.0)
    assert np.all(orbit.p >= 0)
    assert np.max(orbit.p - orbit.upper_bound(g)) <= 1e-8
    assert abs(orbit.p[-1]) < 1e-5
    assert np.all(np.diff(prof.nu) <= 0)
    assert residual(prof, g) < 1e-5


def test_check_front_exists(g):
    check_front_exists(wave_parameters(0.5, g), g)
    with pytest.raises(NoFrontError):
        check_front_exists(wave_parameters(0.5, g, 1.5), g)


def test_z_range_is_covered(g):
    prof = build_minimal(2.0, g, ProfileOptions(z_range=(-60.0, 0.0)))
    assert prof.z[0] <= -60.0
    assert prof(np.array([-60.0]))[0] > 1 - 1e-10


@settings(max_examples=8, deadline=None)
@given(eps=st.floats(0.1, 0.9), extra=st.floats(0.0, 0.5))
def test_parabolic_fronts_are_monotone_and_solve_the_ode(eps, extra):
    g = logistic(1.0)
    params = wave_parameters(eps, g)
    s = params.s_star + extra * (1 / eps - params.s_star)
    if s * eps >= 1 - 1e-3:
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        prof = build_parabolic(wave_parameters(eps, g, s), g)
    assert np.all(np.diff(prof.nu) <= 0)
    assert prof(0.0) == pytest.approx(0.5, abs=1e-9)
    assert residual(prof, g) < 1e-4
