from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bnsdecomp.levy_measures import (
    IntegrandContractError,
    LevyMeasureSpec,
    QuadratureError,
    QuadratureResult,
    Variant,
    assumption2_holds,
    epsilon_kernel,
    integrate_against_nu,
    moment,
    nu_density,
    nu_rule,
    tail_mass,
    tail_mass_inverse,
    truncated_first_moment,
)

# mpmath (30 digits) reference values
GAMMA_DENSITY_AT_0_1 = 0.786861495684700527425386152105
IG_FIRST_MOMENT = 0.0181664240400667779632721202003
IG_SECOND_MOMENT = 0.000253154590428493481947822333276
EPS_REF_T025 = 0.185982952085464873281799200214

specs = st.builds(
    LevyMeasureSpec,
    st.sampled_from(list(Variant)),
    st.floats(0.1, 10.0),
    st.floats(0.01, 2.0),
    st.floats(2.0, 40.0),
)


def test_spec_validation():
    with pytest.raises(ValueError):
        LevyMeasureSpec(Variant.IG_OU, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        LevyMeasureSpec(Variant.GAMMA_OU, 1.0, -1.0, 1.0)
    s = LevyMeasureSpec("GAMMA_OU", 1.0, 2.0, 3.0)
    assert s.variant is Variant.GAMMA_OU
    assert LevyMeasureSpec.from_dict(s.to_dict()) == s


def test_total_mass(ig_spec, gamma_spec):
    assert math.isinf(ig_spec.total_mass)
    assert gamma_spec.total_mass == pytest.approx(gamma_spec.lam * gamma_spec.a)


def test_quadrature_result_invariants():
    with pytest.raises(ValueError):
        QuadratureResult(1.0, -1e-3, 3)
    with pytest.raises(ValueError):
        QuadratureResult(1.0, 0.0, 0)


def test_density_values(gamma_spec, ig_spec):
    assert nu_density(gamma_spec, 0.1) == pytest.approx(GAMMA_DENSITY_AT_0_1, rel=1e-14)
    lam, a, b = gamma_spec.lam, gamma_spec.a, gamma_spec.b
    assert nu_density(gamma_spec, 1e-14) == pytest.approx(lam * a * b, rel=1e-12)
    assert nu_density(ig_spec, 1e-12) > 1e10 * nu_density(ig_spec, 1e-4) / 1e8
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            nu_density(ig_spec, bad)


def test_moments_closed_form(ig_spec, gamma_spec):
    assert moment(ig_spec, 1) == pytest.approx(IG_FIRST_MOMENT, rel=1e-14)
    assert moment(ig_spec, 2) == pytest.approx(IG_SECOND_MOMENT, rel=1e-14)
    lam, a, b = gamma_spec.lam, gamma_spec.a, gamma_spec.b
    assert moment(gamma_spec, 1) == pytest.approx(lam * a / b, rel=1e-15)
    assert moment(gamma_spec, 2) == pytest.approx(2 * lam * a / b**2, rel=1e-15)
    with pytest.raises(ValueError):
        moment(ig_spec, 3)


def test_assumption2_reference_and_failure(ig_spec):
    chk = assumption2_holds(ig_spec, 0.25)
    assert chk and chk.holds
    assert chk.slack == pytest.approx(0.5 * 11.98**2 - 2 * EPS_REF_T025, rel=1e-14)
    bad = assumption2_holds(LevyMeasureSpec(Variant.GAMMA_OU, 1.0, 1.0, 0.01), 10.0)
    assert not bad and bad.slack < 0


def test_assumption2_equality_is_failure():
    lam, T = 1.0, 0.5
    b = 2.0 * epsilon_kernel(lam, T)
    assert not assumption2_holds(LevyMeasureSpec(Variant.GAMMA_OU, lam, 1.0, b), T).holds


def test_integrate_examples(gamma_spec, ig_spec):
    lam, a, b = gamma_spec.lam, gamma_spec.a, gamma_spec.b
    res = integrate_against_nu(gamma_spec, lambda z: z, tol=1e-9)
    assert abs(res.value - lam * a / b) <= max(res.abs_error_estimate, 1e-15)
    assert integrate_against_nu(gamma_spec, lambda z: 0.0).value == 0.0
    rho = -4.7039
    res = integrate_against_nu(gamma_spec, lambda z: -math.expm1(rho * z), tol=1e-9)
    assert res.value == pytest.approx(-lam * a * rho / (b - rho), abs=1e-9)
    res = integrate_against_nu(ig_spec, lambda z: z, tol=1e-9)
    assert res.value == pytest.approx(IG_FIRST_MOMENT, rel=1e-8)
    assert res.abs_error_estimate <= 1e-9 and res.evaluations >= 1


def test_integrand_contract_probe(ig_spec):
    with pytest.raises(IntegrandContractError):
        integrate_against_nu(ig_spec, lambda z: 1.0)
    with pytest.raises(IntegrandContractError):
        integrate_against_nu(ig_spec, lambda z: math.nan)


def test_quadrature_failure_carries_partial(ig_spec):
    with pytest.raises(QuadratureError) as info:
        integrate_against_nu(ig_spec, lambda z: z * math.sin(1e6 * z), tol=1e-14, limit=5, check=False)
    assert info.value.partial is not None


@given(specs)
def test_first_moment_matches_quadrature(spec):
    res = integrate_against_nu(spec, lambda z: z, tol=1e-9)
    assert abs(res.value - moment(spec, 1)) <= 1e-9


@given(specs)
def test_small_and_large_jump_parts_finite(spec):
    zc = 1.0
    head = integrate_against_nu(spec, lambda z: z if z <= zc else 0.0, points=[zc], tol=1e-8)
    tail = integrate_against_nu(spec, lambda z: 1.0 if z > zc else 0.0, points=[zc], check=False, tol=1e-8)
    assert math.isfinite(head.value) and math.isfinite(tail.value)
    # the quadrature contract: error within the requested absolute tolerance
    assert abs(tail.value - tail_mass(spec, zc)) <= 1e-8


@given(specs, st.floats(0.01, 1.0), st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
def test_quadrature_linearity(spec, scale, alpha, beta):
    f = lambda z: z
    g = lambda z: -math.expm1(-scale * z)
    rf, rg = integrate_against_nu(spec, f), integrate_against_nu(spec, g)
    rs = integrate_against_nu(spec, lambda z: alpha * f(z) + beta * g(z))
    budget = (abs(alpha) + abs(beta) + 1.0) * 1e-7  # each call honours the default tol
    assert abs(rs.value - (alpha * rf.value + beta * rg.value)) <= budget + 1e-12


@given(specs, st.floats(0.01, 20.0))
def test_assumption2_monotone_in_b(spec, T):
    bigger = LevyMeasureSpec(spec.variant, spec.lam, spec.a, spec.b * 1.5)
    if assumption2_holds(spec, T):
        assert assumption2_holds(bigger, T)


@given(specs, st.floats(1e-8, 10.0))
def test_density_nonnegative(spec, z):
    assert nu_density(spec, z) >= 0.0


@given(specs, st.floats(1e-9, 0.5))
def test_tail_inverse_round_trip(spec, z):
    y = tail_mass(spec, z)
    if y > 1e-280:
        assert tail_mass_inverse(spec, y) == pytest.approx(z, rel=1e-9)


@given(specs, st.floats(1e-9, 1e-2))
def test_truncated_moment_matches_quadrature(spec, eps):
    exact = truncated_first_moment(spec, eps)
    res = integrate_against_nu(spec, lambda z: z if z <= eps else 0.0, points=[eps],
                               tol=1e-9 * exact, epsrel=1e-10)
    assert abs(exact - res.value) <= 1e-7 * exact


def test_nu_rule_reproduces_moments(ig_spec, gamma_spec):
    for spec in (ig_spec, gamma_spec):
        z, w = nu_rule(spec)
        assert np.sum(w * z) == pytest.approx(moment(spec, 1), rel=1e-12)
        assert np.sum(w * z * z) == pytest.approx(moment(spec, 2), rel=1e-12)


def test_epsilon_kernel_series_branch():
    assert epsilon_kernel(1e-12, 2.0) == pytest.approx(2.0, rel=1e-11)
    assert epsilon_kernel(2.4958, 0.25) == pytest.approx(EPS_REF_T025, rel=1e-14)
