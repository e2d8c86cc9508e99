"""Shot integration: series start, classification, invariants, seeds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import laneshoot as ls
from laneshoot.errors import BracketConfirmationFailed
from laneshoot.shooting import default_r0, membership_threshold

N = 3


def exact_flat(r):
    return (1.0 + np.asarray(r) ** 2 / 3.0) ** -0.5


# ----------------------------------------------------------------------
# exponent regimes
# ----------------------------------------------------------------------

def test_regime_classification():
    assert ls.make_exponents(5, 5, 3).regime is ls.Regime.CRITICAL
    assert ls.make_exponents(4, 6.5, 3).regime is ls.Regime.CRITICAL
    assert ls.make_exponents(6, 6, 3).regime is ls.Regime.SUPERCRITICAL
    assert ls.make_exponents(2, 2, 3).regime is ls.Regime.SUBCRITICAL
    assert ls.make_exponents(5, 5, 4).regime is ls.Regime.SUPERCRITICAL


def test_critical_partner():
    assert ls.critical_partner(4.0, 3) == pytest.approx(6.5, abs=1e-12)
    assert ls.critical_partner(5.0, 3) == pytest.approx(5.0, abs=1e-12)


@given(st.floats(0.05, 0.28), st.floats(0.05, 0.28))
@settings(max_examples=60)
def test_critical_supercritical_implies_pq_above_one(a, b):
    # inverse sums at or below (n-2)/n force pq > 1
    if a + b > 1.0 / 3.0:
        a, b = a / 3.0, b / 3.0
    exps = ls.make_exponents(1.0 / a - 1.0, 1.0 / b - 1.0, 3)
    assert exps.critical_supercritical
    assert exps.p * exps.q > 1.0


def test_make_exponents_rejects_nonpositive():
    with pytest.raises(ValueError):
        ls.make_exponents(-1.0, 5.0, 3)


# ----------------------------------------------------------------------
# origin series
# ----------------------------------------------------------------------

def test_origin_series_unit_values(geom_euclid, exps55):
    st8 = ls.origin_series(geom_euclid.profile, exps55, 1.0, 1.0, 1e-6)
    assert st8.u == pytest.approx(1.0 - 1e-12 / 6.0, abs=1e-18)
    assert st8.pu == pytest.approx(-1e-18 / 3.0, rel=1e-12)


@given(st.floats(0.2, 4.0), st.floats(2.0, 8.0))
@settings(max_examples=40)
def test_origin_series_symmetry(height, exponent):
    # equal heights with equal exponents give identical components
    prof = ls.builtin_profile("euclidean", N)
    exps = ls.make_exponents(exponent, exponent, N)
    r0 = default_r0(height, height, exps.p, exps.q)
    state = ls.origin_series(prof, exps, height, height, r0)
    assert state.u == state.v
    assert state.pu == state.pv


def test_origin_series_matches_closed_form(geom_euclid, exps55):
    # even at r0 = 1e-2 the quadratic series sits within 1e-9 of the exact
    # flat critical solution
    state = ls.origin_series(geom_euclid.profile, exps55, 1.0, 1.0, 1e-2)
    assert state.u == pytest.approx(float(exact_flat(1e-2)), abs=1e-9)


def test_origin_series_rejects_nonpositive(geom_euclid, exps55):
    with pytest.raises(ValueError):
        ls.origin_series(geom_euclid.profile, exps55, 0.0, 1.0, 1e-6)


# ----------------------------------------------------------------------
# shot classification
# ----------------------------------------------------------------------

def test_flat_membership_examples(geom_euclid, exps55):
    # heights above/below the symmetric threshold classify as guaranteed
    out = ls.integrate_shot(geom_euclid, exps55, 1.0, 2.5)
    assert out.kind is ls.OutcomeKind.FIRST_ZERO_U
    out = ls.integrate_shot(geom_euclid, exps55, 2.5, 1.0)
    assert out.kind is ls.OutcomeKind.FIRST_ZERO_V


def test_flat_critical_shot_tracks_closed_form(geom_euclid, exps55):
    out = ls.integrate_shot(geom_euclid, exps55, 1.0, 1.0,
                            ls.IntegratorConfig(horizon=50.0))
    assert out.positive
    traj = out.trajectory
    rs = np.linspace(0.5, 50.0, 500)
    u = traj.eval(rs)[0]
    assert np.max(np.abs(u - exact_flat(rs)) / exact_flat(rs)) < 1e-8


def test_trajectory_interpolant_matches_samples(geom_euclid, exps55):
    out = ls.integrate_shot(geom_euclid, exps55, 1.0, 1.2,
                            ls.IntegratorConfig(horizon=20.0))
    traj = out.trajectory
    vals = traj.eval(traj.r)
    assert np.allclose(vals[0], traj.u, rtol=1e-12, atol=1e-14)
    assert np.allclose(vals[1], traj.v, rtol=1e-12, atol=1e-14)
    assert np.all(np.diff(traj.r) > 0)


def test_components_strictly_decreasing(geom_hyp, exps55):
    out = ls.integrate_shot(geom_hyp, exps55, 1.3, 0.9)
    traj = out.trajectory
    inside = traj.r[traj.r > 1e-5]
    u, v, du, dv = traj.eval(inside)
    assert np.all(du < 0)
    assert np.all(dv < 0)


def test_first_zero_other_component_positive(geom_euclid, geom_exp3, exps55):
    for geom, xi, eta in [(geom_euclid, 1.0, 2.5), (geom_euclid, 3.0, 0.7),
                          (geom_exp3, 1.0, 3.0), (geom_exp3, 3.0, 0.4)]:
        out = ls.integrate_shot(geom, exps55, xi, eta)
        assert not out.positive
        other_initial = eta if out.in_a else xi
        assert out.other_value > 1e-6 * other_initial


def test_flux_residual_small(geom_euclid, geom_hyp, exps55):
    for geom, eta in [(geom_euclid, 1.7), (geom_hyp, 0.8)]:
        out = ls.integrate_shot(geom, exps55, 1.0, eta)
        assert ls.flux_residual(out.trajectory, geom, exps55) < 1e-9


def test_shot_rejects_bad_inputs(geom_euclid, exps55):
    with pytest.raises(ValueError):
        ls.integrate_shot(geom_euclid, exps55, -1.0, 1.0)
    with pytest.raises(ValueError):
        ls.integrate_shot(geom_euclid, exps55, 1.0, 1.0,
                          ls.IntegratorConfig(horizon=-5.0))


def test_convergence_with_tolerance(geom_euclid, exps55):
    # tightening the tolerance must tighten the error against the closed
    # form roughly in proportion
    errs = []
    for rtol in (1e-5, 1e-7, 1e-9):
        out = ls.integrate_shot(
            geom_euclid, exps55, 1.0, 1.0,
            ls.IntegratorConfig(rel_tol=rtol, abs_tol=rtol * 1e-2, horizon=50.0))
        rs = np.linspace(1.0, 50.0, 200)
        u = out.trajectory.eval(rs)[0]
        errs.append(float(np.max(np.abs(u - exact_flat(rs)) / exact_flat(rs))))
    assert errs[1] < errs[0] and errs[2] < errs[1]
    slope = np.polyfit(np.log([1e-5, 1e-7, 1e-9]), np.log(errs), 1)[0]
    assert slope > 0.7


def test_deep_shot_switches_formulation(geom_hyp, exps55):
    out = ls.integrate_shot(geom_hyp, exps55, 1.0, 1.0,
                            ls.IntegratorConfig(horizon=200.0))
    traj = out.trajectory
    assert traj.switch_radius is not None
    assert traj.r[-1] >= 200.0 - 1e-9
    # interpolation is continuous across the hand-off
    rs = np.linspace(traj.switch_radius * 0.9, traj.switch_radius * 1.1, 64)
    u = traj.eval(rs)[0]
    assert np.all(np.diff(u) < 0)


# ----------------------------------------------------------------------
# membership seeds
# ----------------------------------------------------------------------

def test_seed_brackets_flat(geom_euclid, exps55):
    lo, hi = ls.ab_seed_brackets(geom_euclid, exps55, 1.0)
    assert hi == pytest.approx(4.0)
    assert lo == pytest.approx(0.25)
    assert lo < 1.0 < hi   # straddles the symmetric solution


def test_seed_brackets_incomplete(geom_exp3, exps55):
    th = geom_exp3.theta_total
    lo, hi = ls.ab_seed_brackets(geom_exp3, exps55, 1.0)
    assert hi == pytest.approx(4.0 * max(th, (1.0 / th) ** 0.2), rel=1e-12)
    assert lo < 1.0 < hi


def test_membership_threshold_values(geom_euclid, geom_exp3, exps55):
    assert membership_threshold(geom_euclid, exps55, 1.0) == 1.0
    assert membership_threshold(geom_euclid, exps55, 4.0) == pytest.approx(4.0)
    th = geom_exp3.theta_total
    assert membership_threshold(geom_exp3, exps55, 1.0) == pytest.approx(
        max(th, (1.0 / th) ** 0.2))


def test_seed_confirmation_failure_reports(geom_euclid, exps55):
    # a hopeless horizon cannot confirm the A seed
    with pytest.raises(BracketConfirmationFailed):
        ls.ab_seed_brackets(geom_euclid, exps55, 1.0,
                            ls.IntegratorConfig(horizon=1e-3))
