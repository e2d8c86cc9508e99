"""Geometry layer: volume-surface ratio, tails, completeness, convexity."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

import laneshoot as ls
from laneshoot.errors import ProfileError
from laneshoot.manifold import (Completeness, classify_completeness,
                                flux_safe_radius, tail_flux_length,
                                tail_theta, tail_theta_rebased)

N = 3

# total ratio mass of r exp(r^3), n=3: repository regression value, pinned
# by split-radius invariance and a direct mid-range quadrature cross-check
EXP3_THETA = 0.284346949320


def test_theta_euclidean_is_linear():
    prof = ls.builtin_profile("euclidean", N)
    assert ls.theta(prof, 1.5) == pytest.approx(0.5, rel=1e-12)
    assert ls.theta(prof, 7.0) == pytest.approx(7.0 / 3.0, rel=1e-12)


def test_theta_hyperbolic_closed_form():
    # antiderivative of sinh^2 is (sinh r cosh r - r)/2
    prof = ls.builtin_profile("hyperbolic", N)
    r = 10.0
    expected = (math.sinh(r) * math.cosh(r) - r) / (2.0 * math.sinh(r) ** 2)
    assert ls.theta(prof, r) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("family,kwargs", [
    ("euclidean", {}),
    ("hyperbolic", {"curvature": 1.0}),
    ("hyperbolic", {"curvature": 2.5}),
    ("exp_power", {"alpha": 3.0}),
])
def test_theta_small_radius_series(family, kwargs):
    prof = ls.builtin_profile(family, N, **kwargs)
    for r in (1e-3, 1e-2):
        assert abs(ls.theta(prof, r) - r / N) <= 5.0 * r ** 2


@given(st.floats(0.01, 20.0), st.floats(0.3, 2.0))
@settings(max_examples=25, deadline=None)
def test_theta_positive(r, curvature):
    prof = ls.builtin_profile("hyperbolic", N, curvature=curvature)
    assert ls.theta(prof, r) > 0.0


def test_theta_total_complete_profiles_diverge():
    assert ls.theta_total(ls.builtin_profile("euclidean", N)) == math.inf
    assert ls.theta_total(ls.builtin_profile("hyperbolic", N)) == math.inf


def test_theta_total_exp_power_regression():
    val = ls.theta_total(ls.builtin_profile("exp_power", N, alpha=3.0))
    assert val == pytest.approx(EXP3_THETA, abs=2e-9)


def test_theta_total_split_invariance():
    # head quadrature plus tail must not depend on where the split happens
    prof = ls.builtin_profile("exp_power", N, alpha=3.0)
    for r_split in (3.0, 5.0):
        head = quad(lambda r: ls.theta(prof, float(r)), 1e-4, r_split,
                    epsabs=0.0, epsrel=1e-11, limit=800)[0] + 1e-8 / (2 * N)
        assert head + tail_theta(prof, r_split) == pytest.approx(EXP3_THETA, abs=5e-9)


def test_tail_theta_matches_direct_quadrature():
    prof = ls.builtin_profile("exp_power", N, alpha=3.0)
    direct = quad(lambda r: ls.theta(prof, float(r)), 6.0, 8.5,
                  epsabs=0.0, epsrel=1e-10, limit=400)[0]
    assert tail_theta(prof, 6.0) - tail_theta(prof, 8.5) == pytest.approx(direct, rel=1e-8)


def test_tail_identities():
    # tail = Theta(h) g(h) + rebased tail, and the rebased tail is smaller
    prof = ls.builtin_profile("exp_power", N, alpha=3.0)
    h = 5.0
    total = tail_theta(prof, h)
    assert total == pytest.approx(
        ls.theta(prof, h) * tail_flux_length(prof, h) + tail_theta_rebased(prof, h),
        rel=1e-12)
    assert tail_theta_rebased(prof, h) < total


@pytest.mark.parametrize("family,kwargs,expected", [
    ("euclidean", {}, Completeness.COMPLETE),
    ("hyperbolic", {}, Completeness.COMPLETE),
    ("exp_power", {"alpha": 0.5}, Completeness.COMPLETE),
    ("exp_power", {"alpha": 1.0}, Completeness.COMPLETE),
    ("exp_power", {"alpha": 3.0}, Completeness.INCOMPLETE),
    ("exp_power", {"alpha": 4.0}, Completeness.INCOMPLETE),
])
def test_completeness_classifier_agrees_with_declared(family, kwargs, expected):
    prof = ls.builtin_profile(family, N, **kwargs)
    assert prof.completeness_hint is expected
    assert classify_completeness(prof) is expected


def test_profile_rejects_bad_dimension_and_alpha():
    with pytest.raises(ProfileError):
        ls.builtin_profile("euclidean", 2)
    with pytest.raises(ProfileError):
        ls.builtin_profile("exp_power", N, alpha=-1.0)
    with pytest.raises(ProfileError):
        ls.builtin_profile("no_such_family", N)


def test_profile_rejects_wrong_pole_normalization():
    with pytest.raises(ProfileError):
        ls.ManifoldProfile(
            name="bad", n=N,
            psi=lambda r: 2.0 * np.asarray(r),
            psi_prime=lambda r: 2.0 * np.ones_like(np.asarray(r, dtype=float)),
            psi_second=lambda r: np.zeros_like(np.asarray(r, dtype=float)))


# ----------------------------------------------------------------------
# convexity certificates
# ----------------------------------------------------------------------

def _bumped_profile(eps):
    """psi = r + eps r^3 e^-r: curvature dips below zero on (3-sqrt3, 3+sqrt3)
    scaled by eps, while the cumulative curvature integral stays positive
    for small positive eps."""
    def psi(r):
        r = np.asarray(r, dtype=float)
        return r + eps * r ** 3 * np.exp(-r)

    def psi_prime(r):
        r = np.asarray(r, dtype=float)
        return 1.0 + eps * (3.0 * r ** 2 - r ** 3) * np.exp(-r)

    def psi_second(r):
        r = np.asarray(r, dtype=float)
        return eps * (6.0 * r - 6.0 * r ** 2 + r ** 3) * np.exp(-r)

    return ls.ManifoldProfile(name=f"bumped({eps})", n=N, psi=psi,
                              psi_prime=psi_prime, psi_second=psi_second,
                              completeness_hint=Completeness.COMPLETE)


def test_convexity_flat_and_curved(exps55, geom_euclid, geom_hyp):
    assert geom_euclid.volume_convexity.convex
    assert geom_hyp.volume_convexity.convex


def test_convexity_tolerates_curvature_dip(exps55):
    # second derivative of psi goes negative on an interval, yet the
    # cumulative integral stays nonnegative: still certified convex
    prof = _bumped_profile(0.25)
    assert np.any(prof.psi_second(np.linspace(1.5, 4.5, 32)) < 0)
    cert = ls.check_volume_convexity(prof, exps55, r_max=30.0)
    assert cert.convex


def test_convexity_detects_negative_dip(exps55):
    prof = _bumped_profile(-0.25)
    cert = ls.check_volume_convexity(prof, exps55, r_max=30.0)
    assert not cert.convex
    # curvature is negative from r=0 on, so the witness shows up early
    assert cert.witness is not None and cert.witness < 2.0


def test_convexity_requires_pq_above_one(geom_euclid):
    weak = ls.ExponentPair(0.5, 1.0, ls.Regime.SUBCRITICAL)
    with pytest.raises(ValueError):
        ls.check_volume_convexity(geom_euclid.profile, weak)


def test_convexity_monotone_in_exponents():
    # convex at the critical pair stays convex for supercritical pairs
    prof = ls.builtin_profile("hyperbolic", N)
    crit = ls.make_exponents(5.0, 5.0, N)
    assert ls.check_volume_convexity(prof, crit).convex
    for p, q in [(6.0, 6.0), (8.0, 5.5), (9.0, 9.0)]:
        sup = ls.make_exponents(p, q, N)
        assert sup.regime is ls.Regime.SUPERCRITICAL
        assert ls.check_volume_convexity(prof, sup).convex


def test_summary_fields(geom_exp3, geom_hyp):
    assert geom_exp3.incomplete
    assert math.isfinite(geom_exp3.theta_total)
    assert geom_exp3.default_horizon > 5.0
    assert not geom_hyp.incomplete
    assert geom_hyp.default_horizon == 1000.0
    assert 150.0 < flux_safe_radius(geom_hyp.profile) < 250.0
    # theta_of is usable as a plain map
    assert geom_hyp.theta_of(10.0) == pytest.approx(
        ls.theta(geom_hyp.profile, 10.0), rel=1e-12)
