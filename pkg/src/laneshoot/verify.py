"""Acceptance checks: closed-form oracles and structure properties.

Each criterion function returns a :class:`CheckResult` with the measured
values formatted into ``detail``; nothing is printed here. The CLI
``verify`` command and the acceptance test suite share these
implementations, so the tolerances are pinned in exactly one place.

Shared heavy artifacts (curve points, shot batteries, sweeps) are cached
per process.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .diagnostics import (abs_bound_check, divergence_verdict, energy_ledger,
                          limit_upper_bounds, pohozaev_scan)
from .manifold import builtin_profile, summarize
from .shooting import (IntegratorConfig, OutcomeKind, critical_partner,
                       integrate_shot, make_exponents, membership_threshold)
from .solver import find_band, find_eta, fit_power_law, sweep_region

# regression constant of this repository: total volume-surface ratio mass of
# the builtin incomplete example r exp(r^3) in dimension 3 (quadrature value,
# cross-checked against direct integration over [6, 8.5] and split-radius
# invariance at 1e-12)
EXP_POWER3_THETA = 0.284346949320

# per-solid-angle component energy of the flat critical symmetric solution,
# int_0^inf (1 + r^2/3)^-3 r^2 dr = 3 sqrt(3) pi / 16
EUCLID_CRITICAL_ENERGY = 3.0 * math.sqrt(3.0) * math.pi / 16.0

_TIGHT = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
_SWEEP = IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10)

N = 3
_P5 = make_exponents(5.0, 5.0, N)


@dataclass
class CheckResult:
    criterion: str
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[C{self.criterion} {self.name}] {status} - {self.detail}"


@lru_cache(maxsize=None)
def _geom(family: str, **params):
    return summarize(builtin_profile(family, N, **params), _P5)


def _geom_euclid():
    return _geom("euclidean")


def _geom_hyp():
    return _geom("hyperbolic")


def _geom_exp3():
    return _geom("exp_power", alpha=3.0)


def euclid_exact(r):
    """Flat critical symmetric solution from unit height."""
    return (1.0 + np.asarray(r) ** 2 / 3.0) ** -0.5


# ----------------------------------------------------------------------
# shared artifacts
# ----------------------------------------------------------------------

@lru_cache(maxsize=None)
def _euclid_unit_shot():
    t0 = time.perf_counter()
    out = integrate_shot(_geom_euclid(), _P5, 1.0, 1.0,
                         IntegratorConfig(horizon=50.0))
    return out, time.perf_counter() - t0


@lru_cache(maxsize=None)
def _euclid_deep_shot():
    return integrate_shot(_geom_euclid(), _P5, 1.0, 1.0,
                          IntegratorConfig(horizon=1000.0))


@lru_cache(maxsize=None)
def _curve_point(family: str, xi: float):
    return find_eta(_geom(family), _P5, xi, tol=5e-7)


@lru_cache(maxsize=None)
def _band_point_x1():
    return find_band(_geom_exp3(), _P5, 1.0, tol=1e-4)


def _sample_exponents(rng):
    """Critical-supercritical pairs with moderate exponents.

    The inverse sums 1/(p+1), 1/(q+1) are drawn so their total stays at or
    below (n-2)/n = 1/3; exponents stay below ~7.5 so that the absolute
    1e-8 Pohozaev budget is not consumed by roundoff of u^(p+1) terms at
    heights up to 5.
    """
    a = rng.uniform(0.125, 0.20)
    if rng.random() < 0.34:
        b = 1.0 / 3.0 - a          # exactly critical
    else:
        b = rng.uniform(0.125, 1.0 / 3.0 - a)
    return make_exponents(1.0 / a - 1.0, 1.0 / b - 1.0, N)


@lru_cache(maxsize=None)
def _shot_battery(count: int = 100, seed: int = 20260810):
    """Randomized shots with their Pohozaev scans (criteria 3 and 9)."""
    rng = np.random.default_rng(seed)
    geoms = [_geom_euclid(), _geom_hyp(), _geom_exp3()]
    records = []
    for k in range(count):
        geom = geoms[k % 3]
        exps = _sample_exponents(rng)
        xi = rng.uniform(0.2, 5.0)
        eta = rng.uniform(0.2, 5.0)
        out = integrate_shot(geom, exps, xi, eta, _TIGHT)
        scan = pohozaev_scan(out.trajectory, geom, exps)
        records.append((geom, exps, xi, eta, out, scan))
    return records


@lru_cache(maxsize=None)
def _euclid_sweep():
    return sweep_region(_geom_euclid(), _P5, (0.5, 2.0), (0.5, 2.0), 48,
                        IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10,
                                         horizon=50.0),
                        workers=2)


@lru_cache(maxsize=None)
def _exp3_sweep():
    return sweep_region(_geom_exp3(), _P5, (0.5, 2.0), (0.5, 2.0), 64,
                        _SWEEP, workers=2)


# ----------------------------------------------------------------------
# criteria
# ----------------------------------------------------------------------

def criterion_1_euclidean_exact() -> CheckResult:
    """Flat critical shot reproduces the closed-form solution to 1e-8."""
    out, elapsed = _euclid_unit_shot()
    rs = np.linspace(0.0, 50.0, 4001)
    u, v, du, dv = out.trajectory.eval(rs)
    exact = euclid_exact(rs)
    err = float(np.max(np.abs(u - exact) / exact))
    err = max(err, float(np.max(np.abs(v - exact) / exact)))
    passed = err <= 1e-8 and elapsed < 1.0 and out.positive
    return CheckResult(
        "1", "euclidean-exact", passed,
        f"max rel err {err:.2e} <= 1e-8 on [0,50]; runtime {elapsed:.3f}s < 1s")


def criterion_2_pohozaev_equality() -> CheckResult:
    """P vanishes identically on the flat critical shot and is strictly
    negative on the curved one."""
    out, _ = _euclid_unit_shot()
    scan = pohozaev_scan(out.trajectory, _geom_euclid(), _P5)
    max_abs_p = float(np.max(np.abs(scan.P)))

    cp = _curve_point("hyperbolic", 1.0)
    scan_h = pohozaev_scan(cp.witness.trajectory, _geom_hyp(), _P5)
    mask = scan_h.r >= 1.0
    worst_hyp = float(np.max(scan_h.P[mask]))
    scan_end = float(scan_h.r[-1])
    traj_end = float(cp.witness.trajectory.r[-1])
    passed = (max_abs_p <= 1e-9 and worst_hyp < -1e-6
              and scan_end >= 190.0 and traj_end >= 200.0)
    return CheckResult(
        "2", "pohozaev-equality", passed,
        f"flat max|P| {max_abs_p:.2e} <= 1e-9; curved max P on "
        f"[1,{scan_end:.0f}] is {worst_hyp:.3e} < -1e-6 "
        f"(trajectory reaches r={traj_end:.3g})")


def criterion_3_pohozaev_randomized() -> CheckResult:
    """Sign and monotonicity of P over the randomized battery."""
    worst_p = -math.inf
    worst_inc = -math.inf
    violations = 0
    for geom, exps, xi, eta, out, scan in _shot_battery():
        worst_p = max(worst_p, scan.max_p)
        worst_inc = max(worst_inc, scan.max_p_increment)
        if scan.max_p > 1e-8 or scan.max_p_increment > 1e-8:
            violations += 1
    passed = violations == 0
    return CheckResult(
        "3", "pohozaev-randomized", passed,
        f"{len(_shot_battery())} shots: max P {worst_p:.2e} <= 1e-8, "
        f"max increment {worst_inc:.2e} <= 1e-8, violations {violations}")


def criterion_4_curve_symmetry() -> CheckResult:
    """Equal exponents force eta(xi) = xi on complete profiles."""
    worst = 0.0
    lines = []
    for family in ("euclidean", "hyperbolic"):
        for xi in (0.5, 1.0, 2.0, 4.0):
            cp = _curve_point(family, xi)
            worst = max(worst, abs(cp.eta - xi))
            lines.append(f"{family[:3]}({xi:g})={cp.eta:.9f}")
    passed = worst <= 1e-6
    return CheckResult(
        "4", "curve-symmetry", passed,
        f"max |eta(xi)-xi| {worst:.2e} <= 1e-6 [{', '.join(lines)}]")


@lru_cache(maxsize=None)
def _scaling_points():
    q = critical_partner(4.0, N)
    exps = make_exponents(4.0, q, N)
    pts = []
    prev = None
    for xi in (1.0, 2.0, 4.0, 8.0):
        bracket = None
        if prev is not None:
            guess = prev.eta * 2.0 ** ((exps.p + 1.0) / (exps.q + 1.0))
            bracket = (0.8 * guess, 1.25 * guess)
        prev = find_eta(_geom_euclid(), exps, xi, tol=2e-5, bracket=bracket)
        pts.append(prev)
    return exps, pts


def criterion_5_scaling_law() -> CheckResult:
    """Flat-space curve follows eta = c xi^((p+1)/(q+1)) for (p,q)=(4,6.5)."""
    exps, pts = _scaling_points()
    target = (exps.p + 1.0) / (exps.q + 1.0)
    slope, mult = fit_power_law([p.xi for p in pts], [p.eta for p in pts])
    err = abs(slope - target)
    passed = err <= 1e-3 and abs(exps.q - 6.5) < 1e-12
    return CheckResult(
        "5", "scaling-law", passed,
        f"fitted slope {slope:.6f} vs (p+1)/(q+1)={target:.6f}, "
        f"err {err:.2e} <= 1e-3 (multiplier c~{mult:.5f})")


def criterion_6_membership_thresholds() -> CheckResult:
    """Explicit membership thresholds classify as guaranteed."""
    ge, gx = _geom_euclid(), _geom_exp3()
    results = []
    out = integrate_shot(ge, _P5, 1.0, 2.5)
    results.append(("euclid (1,2.5) in A", out.in_a))
    out = integrate_shot(ge, _P5, 2.5, 1.0)
    results.append(("euclid (2.5,1) in B", out.in_b))

    t_a = 1.05 * membership_threshold(gx, _P5, 1.0)
    out = integrate_shot(gx, _P5, 1.0, 2.0 * t_a)
    results.append((f"exp3 (1,{2*t_a:.3f}) in A", out.in_a))
    th = gx.theta_total
    s = 1.0
    t_b = min((s / th) ** (1.0 / _P5.q), th * s ** _P5.p) / 1.05
    out = integrate_shot(gx, _P5, 2.0 * s, t_b)
    results.append((f"exp3 (2,{t_b:.3f}) in B", out.in_b))

    passed = all(ok for _, ok in results)
    return CheckResult(
        "6", "membership-thresholds", passed,
        "; ".join(f"{name}: {'ok' if ok else 'WRONG'}" for name, ok in results))


def criterion_7_band_structure() -> CheckResult:
    """Band edges, signatures, width bound and feasibility at xi=1."""
    bp = _band_point_x1()
    th = _geom_exp3().theta_total
    width_bound = (5.0 / 4.0) ** 0.25 * th ** -0.25
    feas_bound = th * 1.0 + (1.0 / th) ** (1.0 / 5.0)
    tol = 1e-4
    checks = {
        "gap>10*tol": bp.gap > 10.0 * tol,
        "signatures": bp.signature_ok,
        "gap<=bound": bp.gap <= width_bound,
        "eta_M<=feas": bp.eta_M <= feas_bound,
        "feasible": bp.feasible,
    }
    passed = all(checks.values())
    return CheckResult(
        "7", "band-structure", passed,
        f"[{bp.eta_m:.6f}, {bp.eta_M:.6f}], gap {bp.gap:.4f} "
        f"(bound {width_bound:.4f}), eta_M vs feasibility {feas_bound:.4f}; "
        + ", ".join(f"{k}:{'ok' if v else 'FAIL'}" for k, v in checks.items()))


def criterion_8_vanishing_limits() -> CheckResult:
    """Every positive-to-horizon shot on complete profiles reports both
    components vanishing."""
    shots = [(_euclid_unit_shot()[0], "euclid(1,1)")]
    for family in ("euclidean", "hyperbolic"):
        for xi in (0.5, 1.0, 2.0, 4.0):
            cp = _curve_point(family, xi)
            if cp.witness.positive:
                shots.append((cp.witness, f"{family[:3]} curve xi={xi:g}"))
    sweep = _euclid_sweep()
    n_sweep = 0
    sweep_ok = True
    for i in range(len(sweep.xis)):
        for j in range(len(sweep.etas)):
            if sweep.classes[i, j] == "G":
                n_sweep += 1
                sweep_ok &= bool(sweep.van_u[i, j] and sweep.van_v[i, j])
    bad = [label for out, label in shots
           if not (out.enclosure_u.vanishes and out.enclosure_v.vanishes)]
    passed = not bad and sweep_ok
    return CheckResult(
        "8", "vanishing-limits", passed,
        f"{len(shots)} witness shots + {n_sweep} sweep proxies all vanish"
        + (f"; failing: {bad}" if bad else "")
        + ("" if sweep_ok else "; sweep proxies failing"))


def criterion_9_no_simultaneous_zero() -> CheckResult:
    """At every first zero the surviving component stays well positive."""
    worst = math.inf
    total = 0
    for geom, exps, xi, eta, out, scan in _shot_battery():
        if out.kind is OutcomeKind.POSITIVE_TO_HORIZON:
            continue
        total += 1
        other_initial = eta if out.in_a else xi
        worst = min(worst, out.other_value / other_initial)
    passed = total > 0 and worst >= 1e-6
    return CheckResult(
        "9", "no-simultaneous-zero", passed,
        f"{total} first-zero shots, min surviving/initial {worst:.3e} >= 1e-6")


@lru_cache(maxsize=None)
def _ordering_battery(pairs: int = 50, seed: int = 1021):
    rng = np.random.default_rng(seed)
    geoms = [_geom_euclid(), _geom_hyp(), _geom_exp3()]
    worst = math.inf
    checked = 0
    for k in range(pairs):
        geom = geoms[k % 3]
        xi2 = rng.uniform(0.3, 3.0)
        xi1 = xi2 + rng.uniform(0.0, 2.0)
        eta1 = rng.uniform(0.3, 3.0)
        eta2 = eta1 + rng.uniform(1e-3, 2.0)
        out1 = integrate_shot(geom, _P5, xi1, eta1)
        out2 = integrate_shot(geom, _P5, xi2, eta2)
        end = 0.999 * min(
            out1.zero_radius or out1.horizon, out2.zero_radius or out2.horizon)
        r_lo = 2e-6
        rs = np.geomspace(r_lo, end, 240)
        u1, v1 = out1.trajectory.eval(rs)[:2]
        u2, v2 = out2.trajectory.eval(rs)[:2]
        d_u = np.diff(u1 - u2)
        d_v = np.diff(v2 - v1)
        scale = 1.0 + max(xi1, eta2)
        worst = min(worst, float(np.min(d_u) / scale), float(np.min(d_v) / scale))
        checked += 1
    return checked, worst


def criterion_10_ordering() -> CheckResult:
    """Component differences of ordered initial data increase in r."""
    checked, worst = _ordering_battery()
    passed = worst >= -1e-10
    return CheckResult(
        "10", "ordering", passed,
        f"{checked} pairs, min normalized increment {worst:.3e} >= -1e-10")


def criterion_11_energy_rigidity() -> CheckResult:
    """Energy identities, the flat critical energy value, and the curved
    divergence proxy."""
    out = _euclid_deep_shot()
    cps = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0]
    led = energy_ledger(out.trajectory, _geom_euclid(), _P5, cps)
    res = led.max_residual
    i_u_err = abs(led.i_u[-1] - EUCLID_CRITICAL_ENERGY)

    cp = _curve_point("hyperbolic", 1.0)
    cps_h = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 150.0, 200.0]
    led_h = energy_ledger(cp.witness.trajectory, _geom_hyp(), _P5, cps_h)
    res = max(res, led_h.max_residual)
    diverges = divergence_verdict(led_h, EUCLID_CRITICAL_ENERGY, factor=10.0)
    passed = res <= 1e-8 and i_u_err <= 1e-6 and diverges
    return CheckResult(
        "11", "energy-rigidity", passed,
        f"identity residual {res:.2e} <= 1e-8; flat I_u(1000) off by "
        f"{i_u_err:.2e} <= 1e-6; curved I_mixed(200)={led_h.i_mixed[-1]:.3e} "
        f"exceeds 10x flat reference: {diverges}")


def _column_runs(classes_row) -> int:
    best = cur = 0
    for c in classes_row:
        cur = cur + 1 if c == "G" else 0
        best = max(best, cur)
    return best


def criterion_12_region_topology() -> CheckResult:
    """Flat sweeps have a one-dimensional proxy set; the incomplete profile
    a two-dimensional strip."""
    flat = _euclid_sweep()
    flat_max = max(int(np.sum(flat.classes[i, :] == "G"))
                   for i in range(len(flat.xis)))
    strip = _exp3_sweep()
    strip_min = min(_column_runs(strip.classes[i, :])
                    for i in range(len(strip.xis)))
    errors = int(np.sum(flat.classes == "!") + np.sum(strip.classes == "!"))
    passed = flat_max <= 2 and strip_min >= 3 and errors == 0
    return CheckResult(
        "12", "region-topology", passed,
        f"flat proxy width per column <= {flat_max} (need <=2); incomplete "
        f"min consecutive proxies {strip_min} (need >=3); cell errors {errors}")


def check_limit_bounds() -> CheckResult:
    """Arithmetic of the explicit limit bounds plus the band witnesses."""
    b_u, b_v = limit_upper_bounds(_P5, 1.0)
    coeff = (5.0 / 4.0) ** 0.25
    sym_err = max(abs(b_u - coeff), abs(b_v - coeff))

    bp = _band_point_x1()
    th = _geom_exp3().theta_total
    ok = True
    for wit in (bp.witness_m, bp.witness_mid, bp.witness_M):
        chk = abs_bound_check((wit.enclosure_u, wit.enclosure_v), _P5, th)
        ok &= chk.satisfied
    passed = sym_err <= 1e-12 and ok
    return CheckResult(
        "bounds", "limit-bounds", passed,
        f"p=q=5 coefficient err {sym_err:.2e} vs (5/4)^(1/4); band "
        f"witnesses within bounds: {ok}")


SUITES = {
    "euclidean-exact": (criterion_1_euclidean_exact,),
    "symmetry": (criterion_4_curve_symmetry, criterion_8_vanishing_limits),
    "scaling": (criterion_5_scaling_law,),
    "pohozaev": (criterion_2_pohozaev_equality, criterion_3_pohozaev_randomized,
                 criterion_9_no_simultaneous_zero),
    "band": (criterion_6_membership_thresholds, criterion_7_band_structure,
             criterion_12_region_topology),
    "bounds": (check_limit_bounds,),
    "rigidity": (criterion_11_energy_rigidity,),
    "ordering": (criterion_10_ordering,),
}

ALL_CRITERIA = (
    criterion_1_euclidean_exact,
    criterion_2_pohozaev_equality,
    criterion_3_pohozaev_randomized,
    criterion_4_curve_symmetry,
    criterion_5_scaling_law,
    criterion_6_membership_thresholds,
    criterion_7_band_structure,
    criterion_8_vanishing_limits,
    criterion_9_no_simultaneous_zero,
    criterion_10_ordering,
    criterion_11_energy_rigidity,
    criterion_12_region_topology,
)


def run_suite(name: str) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(f"unknown suite '{name}'; choose from {sorted(SUITES)}")
    return [fn() for fn in SUITES[name]]
