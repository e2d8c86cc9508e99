"""Energy and Pohozaev machinery, enclosures, explicit bounds, ledgers."""

import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad

import laneshoot as ls
from laneshoot.diagnostics import limit_upper_bounds
from laneshoot.errors import EnclosureTooWide

N = 3

EUCLID_ENERGY = 3.0 * math.sqrt(3.0) * math.pi / 16.0


@pytest.fixture(scope="module")
def flat_unit_shot(geom_euclid, exps55):
    return ls.integrate_shot(geom_euclid, exps55, 1.0, 1.0,
                             ls.IntegratorConfig(horizon=50.0))


def test_scan_starts_at_zero(geom_euclid, exps55, flat_unit_shot):
    scan = ls.pohozaev_scan(flat_unit_shot.trajectory, geom_euclid, exps55)
    # P(0) = 0 and F(0) = xi^(p+1)/(p+1) + eta^(q+1)/(q+1), read off at the
    # series hand-off radius
    assert abs(scan.P[0]) < 1e-15
    assert scan.F[0] == pytest.approx(1.0 / 6.0 + 1.0 / 6.0, rel=1e-9)


def test_flat_critical_pohozaev_vanishes(geom_euclid, exps55, flat_unit_shot):
    scan = ls.pohozaev_scan(flat_unit_shot.trajectory, geom_euclid, exps55)
    assert np.max(np.abs(scan.P)) < 1e-9
    assert np.all(np.abs(scan.K) < 1e-12)


def test_curved_pohozaev_strictly_negative(geom_hyp, exps55):
    out = ls.integrate_shot(geom_hyp, exps55, 1.0, 1.0,
                            ls.IntegratorConfig(horizon=50.0))
    scan = ls.pohozaev_scan(out.trajectory, geom_hyp, exps55)
    late = scan.r >= 1.0
    assert np.all(scan.P[late] < -1e-6)
    assert np.all(scan.K[scan.r > 1e-3] < 0)
    # nonincreasing along the trajectory
    assert scan.max_p_increment <= 1e-12


def test_derivative_identities_residuals(geom_hyp, exps55):
    out = ls.integrate_shot(geom_hyp, exps55, 1.2, 0.8)
    scan = ls.pohozaev_scan(out.trajectory, geom_hyp, exps55)
    # ten times the default integrator tolerance
    assert scan.energy_identity_residual <= 1e-9
    assert scan.pohozaev_identity_residual <= 1e-9


def test_scan_is_a_sequence(geom_euclid, exps55, flat_unit_shot):
    scan = ls.pohozaev_scan(flat_unit_shot.trajectory, geom_euclid, exps55)
    assert len(scan) == len(scan.r)
    sample = scan[3]
    assert isinstance(sample, ls.PohozaevSample)
    assert sample.r == scan.r[3]


# ----------------------------------------------------------------------
# limit enclosures
# ----------------------------------------------------------------------

def test_symmetric_enclosures_coincide(geom_exp3, exps55):
    out = ls.integrate_shot(geom_exp3, exps55, 1.0, 1.0)
    enc_u, enc_v = out.enclosure_u, out.enclosure_v
    assert enc_u.lower == pytest.approx(enc_v.lower, rel=1e-12)
    assert enc_u.upper == pytest.approx(enc_v.upper, rel=1e-12)
    assert enc_u.lower > 0.5   # interior shot keeps a solid positive limit
    assert not enc_u.vanishes


def test_enclosure_nesting_under_deeper_horizon(geom_exp3, exps55):
    # rerunning with a deeper horizon must give enclosures nested inside
    # the shallower ones (up to quadrature slack)
    shallow = ls.integrate_shot(geom_exp3, exps55, 1.0, 0.9,
                                ls.IntegratorConfig(horizon=5.0))
    deep = ls.integrate_shot(geom_exp3, exps55, 1.0, 0.9,
                             ls.IntegratorConfig(horizon=8.0))
    slack = 1e-9
    for a, b in ((shallow.enclosure_u, deep.enclosure_u),
                 (shallow.enclosure_v, deep.enclosure_v)):
        assert a.lower - slack <= b.lower
        assert b.upper <= a.upper + slack
        assert b.upper - b.lower < a.upper - a.lower


def test_enclosure_bounds_ordered(geom_exp3, exps55):
    out = ls.integrate_shot(geom_exp3, exps55, 0.7, 1.1)
    for enc in (out.enclosure_u, out.enclosure_v):
        assert 0.0 <= enc.lower <= enc.upper


def test_enclosure_width_certificate(geom_exp3, exps55):
    out = ls.integrate_shot(geom_exp3, exps55, 1.0, 1.0,
                            ls.IntegratorConfig(horizon=4.0))
    with pytest.raises(EnclosureTooWide):
        ls.limit_enclosure(out, geom_exp3, exps55, 1.0, 1.0, max_width=1e-6)


def test_complete_enclosures_report_vanishing(geom_euclid, exps55, flat_unit_shot):
    enc_u, enc_v = flat_unit_shot.enclosure_u, flat_unit_shot.enclosure_v
    assert enc_u.lower == 0.0 and enc_v.lower == 0.0
    assert enc_u.vanishes and enc_v.vanishes


# ----------------------------------------------------------------------
# explicit limit bounds
# ----------------------------------------------------------------------

def test_limit_bounds_symmetric_simplification(exps55):
    # p=q=5 collapses both bounds to (5/4)^(1/4) theta^(-1/4)
    for theta in (0.3, 1.0, 2.5):
        b_u, b_v = limit_upper_bounds(exps55, theta)
        expected = (5.0 / 4.0) ** 0.25 * theta ** -0.25
        assert b_u == pytest.approx(expected, rel=1e-14)
        assert b_v == pytest.approx(expected, rel=1e-14)


def test_limit_bounds_extended_precision_cross_check():
    # direct formula evaluation at 50 digits for an asymmetric pair
    p, q, theta = 4.0, 6.5, 0.284346949320
    exps = ls.make_exponents(p, q, N)
    b_u, b_v = limit_upper_bounds(exps, theta)
    with mpmath.workdps(50):
        mp, mq, mtheta = mpmath.mpf(p), mpmath.mpf(q), mpmath.mpf(theta)
        pq1 = mp * mq - 1
        ref_u = (mp ** ((mq + 1) / pq1) * (mq + 1) ** ((mq + 2) / pq1)
                 / ((mp + 1) ** (1 / pq1) * pq1 ** ((mq + 1) / pq1))
                 * mtheta ** (-(mq + 1) / pq1))
        ref_v = (mq ** ((mp + 1) / pq1) * (mp + 1) ** ((mp + 2) / pq1)
                 / ((mq + 1) ** (1 / pq1) * pq1 ** ((mp + 1) / pq1))
                 * mtheta ** (-(mp + 1) / pq1))
    assert b_u == pytest.approx(float(ref_u), rel=1e-13)
    assert b_v == pytest.approx(float(ref_v), rel=1e-13)


def test_limit_bounds_blow_up_as_pq_reaches_one():
    theta = 0.5
    small = ls.ExponentPair(1.0, 1.0 + 1e-9, ls.Regime.SUBCRITICAL)
    b_u, b_v = limit_upper_bounds(small, theta)
    assert b_u > 1e6 and b_v > 1e6
    degenerate = ls.ExponentPair(1.0, 1.0, ls.Regime.SUBCRITICAL)
    with pytest.raises(ValueError):
        limit_upper_bounds(degenerate, theta)


def test_abs_bound_check_verdicts(exps55):
    enc = ls.LimitEnclosure(0.1, 0.4, False)
    chk = ls.abs_bound_check((enc, enc), exps55, theta=0.284346949320)
    assert chk.satisfied and chk.margin > 0
    big = ls.LimitEnclosure(0.1, 50.0, False)
    chk = ls.abs_bound_check((big, enc), exps55, theta=0.284346949320)
    assert not chk.satisfied and chk.excess > 0


# ----------------------------------------------------------------------
# energy ledger
# ----------------------------------------------------------------------

def test_energy_oracle_closed_form():
    # independent oracle: quadrature of the closed-form density
    val = quad(lambda r: (1 + r * r / 3.0) ** -3 * r * r, 0, np.inf,
               epsabs=0.0, epsrel=1e-12)[0]
    assert val == pytest.approx(EUCLID_ENERGY, rel=1e-11)


def test_ledger_identities_and_value(geom_euclid, exps55):
    out = ls.integrate_shot(geom_euclid, exps55, 1.0, 1.0,
                            ls.IntegratorConfig(horizon=1000.0))
    led = ls.energy_ledger(out.trajectory, geom_euclid, exps55,
                           [0.5, 1.0, 5.0, 20.0, 100.0, 1000.0])
    assert led.max_residual <= 1e-8
    assert led.i_u[-1] == pytest.approx(EUCLID_ENERGY, abs=1e-6)
    assert led.i_v[-1] == pytest.approx(EUCLID_ENERGY, abs=1e-6)
    # all three cumulative energies increase
    for arr in (led.i_mixed, led.i_u, led.i_v):
        assert np.all(np.diff(arr) > 0)
    # mixed energy is dominated by either component energy (signs of u', v')
    assert np.all(led.i_mixed <= led.i_u + 1e-12)
    assert np.all(led.i_mixed <= led.i_v + 1e-12)


def test_ledger_small_radius_limit(geom_euclid, exps55, flat_unit_shot):
    led = ls.energy_ledger(flat_unit_shot.trajectory, geom_euclid, exps55,
                           [1e-4, 1e-3])
    assert np.all(led.i_u < 1e-11)
    assert np.all(led.i_mixed < 1e-11)


def test_divergence_verdict(geom_hyp, geom_euclid, exps55):
    out = ls.integrate_shot(geom_hyp, exps55, 1.0, 1.0,
                            ls.IntegratorConfig(horizon=200.0))
    led = ls.energy_ledger(out.trajectory, geom_hyp, exps55,
                           [1.0, 5.0, 20.0, 50.0, 100.0, 200.0])
    assert ls.divergence_verdict(led, EUCLID_ENERGY, factor=10.0)
    # the flat critical ledger saturates instead of diverging
    out_e = ls.integrate_shot(geom_euclid, exps55, 1.0, 1.0,
                              ls.IntegratorConfig(horizon=1000.0))
    led_e = ls.energy_ledger(out_e.trajectory, geom_euclid, exps55,
                             [1.0, 10.0, 100.0, 500.0, 1000.0])
    assert not ls.divergence_verdict(led_e, EUCLID_ENERGY, factor=10.0)


def test_ledger_rejects_bad_checkpoints(geom_euclid, exps55, flat_unit_shot):
    with pytest.raises(ValueError):
        ls.energy_ledger(flat_unit_shot.trajectory, geom_euclid, exps55, [60.0])
