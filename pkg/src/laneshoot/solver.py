"""Existence curve and band location by bracketed bisection over shots.

On stochastically complete geometry every initial height xi admits exactly
one eta giving a globally positive trajectory, found by bisecting between a
first-zero-of-v shot (below the curve) and a first-zero-of-u shot (above).
On incomplete geometry the globally positive set is a band [eta_m, eta_M];
each edge is a two-class bisection between a first-zero side and a
positive-to-horizon side, with the interior seed found by scanning the
feasibility interval that the total ratio mass theta imposes on the
initial heights.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import manifold
from .errors import (BracketConfirmationFailed, BracketInvariantBroken,
                     IntegrationError, MonotonicityViolation,
                     NoGlobalProxyFound)
from .manifold import Completeness, GeometricSummary, profile_from_spec, summarize
from .shooting import (DEFAULT_CONFIG, ExponentPair, IntegratorConfig,
                       OutcomeKind, Regime, ShotOutcome, ab_seed_brackets,
                       integrate_shot, make_exponents)

# horizon ladder for shots that stay positive but must be classified
_EXTEND_FACTOR = 4.0
_EXTEND_CAP = 3e6


@dataclass
class CurvePoint:
    """One point of the existence curve eta(xi) on complete geometry.

    The bisection maintains low-in-B / high-in-A; ``bracket_width`` is the
    achieved half width, and the witness is a positive-to-horizon shot at
    eta when one exists at the deepest horizon tried, otherwise the
    longest-surviving classified shot.
    """

    xi: float
    eta: float
    bracket_width: float
    witness: ShotOutcome
    horizon: float


@dataclass
class BandPoint:
    """One slice [eta_m, eta_M] of the existence band on incomplete geometry."""

    xi: float
    eta_m: float
    eta_M: float
    width_m: float
    width_M: float
    witness_m: ShotOutcome
    witness_mid: ShotOutcome
    witness_M: ShotOutcome
    signature_ok: bool    # limit signatures (+,0)/(+,+)/(0,+) at m/mid/M
    feasible: bool        # theta feasibility constraints on both edges

    @property
    def gap(self) -> float:
        return self.eta_M - self.eta_m


@dataclass
class RegionMap:
    """Row-major classification of a (xi, eta) grid.

    ``classes`` holds 'A', 'B', 'G' (positive-to-horizon proxy) or '!' for
    per-cell integrator failures (detail in ``status``). Enclosure bounds
    are populated for proxy cells only.
    """

    xis: np.ndarray
    etas: np.ndarray
    classes: np.ndarray          # dtype '<U1', shape (len(xis), len(etas))
    horizons: np.ndarray
    status: np.ndarray           # dtype object
    enc_lo_u: np.ndarray
    enc_up_u: np.ndarray
    enc_lo_v: np.ndarray
    enc_up_v: np.ndarray
    van_u: np.ndarray            # vanish verdicts, False on non-proxy cells
    van_v: np.ndarray

    def column_classes(self, i: int) -> list[str]:
        return list(self.classes[i, :])


def _require_structure(geom: GeometricSummary, exps: ExponentPair) -> Optional[object]:
    """Common preconditions of the structure theorems; returns the convexity
    certificate (computing it if the summary lacks one)."""
    if exps.regime is Regime.SUBCRITICAL:
        warnings.warn(
            "subcritical exponents: existence structure is not guaranteed; "
            "bracket invariants are not enforced", stacklevel=3)
        return None
    cert = geom.volume_convexity
    if cert is None:
        cert = manifold.check_volume_convexity(geom.profile, exps)
    if not cert.convex:
        raise ValueError(
            f"volume power is not convex (witness r={cert.witness}); the "
            "curve/band structure theorems do not apply")
    return cert


def _classify_with_extension(geom, exps, xi, eta, config, horizon,
                             horizon_cap=_EXTEND_CAP):
    """Shoot at (xi, eta); while positive-to-horizon and below the cap,
    deepen the horizon. Returns (outcome, horizon_used)."""
    out = integrate_shot(geom, exps, xi, eta, replace(config, horizon=horizon))
    while out.positive and horizon < horizon_cap:
        horizon = min(horizon * _EXTEND_FACTOR, horizon_cap)
        out = integrate_shot(geom, exps, xi, eta, replace(config, horizon=horizon))
    return out, horizon


def _survival_radius(out: ShotOutcome) -> float:
    return out.zero_radius if out.zero_radius is not None else out.horizon


def find_eta(geom: GeometricSummary, exps: ExponentPair, xi: float,
             tol: float = 1e-8, config: IntegratorConfig = DEFAULT_CONFIG,
             bracket: Optional[tuple[float, float]] = None,
             horizon_cap: float = _EXTEND_CAP) -> CurvePoint:
    """Locate the unique eta(xi) on stochastically complete geometry.

    Bisects between a guaranteed B seed and A seed. Shots that stay
    positive at the working horizon are re-shot at a deepened horizon
    (sticky across the bisection) until they classify or the cap is
    reached; reaching the cap means the midpoint is indistinguishable from
    the curve at that depth and the bisection stops there.
    """
    if geom.completeness is not Completeness.COMPLETE:
        raise ValueError("find_eta requires a stochastically complete profile; "
                         "use find_band on incomplete ones")
    _require_structure(geom, exps)
    enforce = exps.critical_supercritical

    lo = hi = None
    if bracket is not None:
        b_lo, b_hi = bracket
        if 0 < b_lo < b_hi:
            out_lo = integrate_shot(geom, exps, xi, b_lo, config)
            out_hi = integrate_shot(geom, exps, xi, b_hi, config)
            if out_lo.in_b and out_hi.in_a:
                lo, hi = b_lo, b_hi
    if lo is None:
        lo, hi = ab_seed_brackets(geom, exps, xi, config)

    horizon = config.horizon if config.horizon is not None else geom.default_horizon
    longest: Optional[ShotOutcome] = None
    stalled: Optional[ShotOutcome] = None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        out, horizon = _classify_with_extension(
            geom, exps, xi, mid, config, horizon, horizon_cap)
        if out.positive:
            stalled = out       # on the curve to within this depth
            break
        if longest is None or _survival_radius(out) > _survival_radius(longest):
            longest = out
        if out.in_b:
            lo = mid
        else:
            hi = mid

    eta = 0.5 * (lo + hi)
    width = 0.5 * (hi - lo)
    if stalled is not None:
        witness = stalled
    else:
        witness = integrate_shot(geom, exps, xi, eta,
                                 replace(config, horizon=horizon))
        if not witness.positive:
            if enforce and witness.in_b and eta <= lo:
                raise BracketInvariantBroken(
                    f"midpoint eta={eta} reclassified below the bracket")
            witness = longest if longest is not None else witness
    return CurvePoint(xi, eta, width, witness, horizon)


# ----------------------------------------------------------------------
# incomplete case: the existence band
# ----------------------------------------------------------------------

def feasibility_interval(geom: GeometricSummary, exps: ExponentPair,
                         xi: float) -> tuple[float, float]:
    """Interval that must contain the band, from the theta constraints.

    A globally positive shot obeys xi >= (eta - theta xi^p)_+^q theta and
    eta >= (xi - theta eta^q)_+^p theta; the first caps eta at
    theta xi^p + (xi/theta)^(1/q), the second is a monotone lower bound
    solved by bisection.
    """
    p, q = exps.p, exps.q
    th = geom.theta_total
    hi = th * xi ** p + (xi / th) ** (1.0 / q)

    def deficit(eta):
        return eta - th * max(xi - th * eta ** q, 0.0) ** p

    lo_a, lo_b = 0.0, hi
    if deficit(lo_b) < 0:
        return 0.0, hi
    for _ in range(80):
        mid = 0.5 * (lo_a + lo_b)
        if deficit(mid) < 0:
            lo_a = mid
        else:
            lo_b = mid
    return lo_a, hi


def _certified_positive(out: ShotOutcome) -> bool:
    return (out.positive and out.enclosure_u is not None
            and out.enclosure_u.lower > 0.0 and out.enclosure_v.lower > 0.0)


def _global_seed(geom, exps, xi, config, eta_low, eta_high,
                 hint: Optional[float] = None) -> tuple[float, ShotOutcome]:
    f_lo, f_hi = feasibility_interval(geom, exps, xi)
    a = max(eta_low, f_lo if f_lo > 0 else eta_low)
    b = min(eta_high, f_hi)
    if not (a < b):
        a, b = eta_low, eta_high
    symmetric_guess = xi ** ((exps.p + 1.0) / (exps.q + 1.0))
    candidates = [c for c in (hint, symmetric_guess) if c is not None and a < c < b]
    candidates += list(np.geomspace(a * 1.01, b * 0.99, 15))
    seen = set()
    for eta in candidates:
        key = round(float(eta), 12)
        if key in seen:
            continue
        seen.add(key)
        out = integrate_shot(geom, exps, xi, float(eta), config)
        if _certified_positive(out):
            return float(eta), out
    raise NoGlobalProxyFound(
        f"no certified positive shot for xi={xi} in [{a:.4g}, {b:.4g}]; "
        "extend the horizon")


def _edge_bisect(geom, exps, xi, lo, hi, config, tol, first_zero_kind,
                 zero_side_low: bool):
    """Bisect one band edge between a first-zero side and a positive side.

    ``zero_side_low`` True means the low endpoint carries the first-zero
    class (lower edge); False mirrors it for the upper edge. Returns
    (edge_eta_on_positive_side, half_width, witness_positive).
    """
    witness = None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        out = integrate_shot(geom, exps, xi, mid, config)
        if out.positive:
            witness = out
            if zero_side_low:
                hi = mid
            else:
                lo = mid
        elif out.kind is first_zero_kind:
            if zero_side_low:
                lo = mid
            else:
                hi = mid
        else:
            raise BracketInvariantBroken(
                f"shot at (xi={xi}, eta={mid}) classified {out.kind.value} "
                "inside the opposite edge bracket")
    edge = hi if zero_side_low else lo
    if witness is None or abs(witness.eta - edge) > tol:
        witness = integrate_shot(geom, exps, xi, edge, config)
    return edge, 0.5 * (hi - lo), witness


def _edge_slack(witness: ShotOutcome, geom: GeometricSummary,
                exps: ExponentPair, vanishing: str) -> float:
    """Bound on the outward bias of a band edge.

    By the ordering comparison, an edge candidate eta below the true edge
    satisfies (true edge) - eta <= v(H) at the true edge, which is itself
    at most the certified width of the vanishing component; that width is
    evaluated on the witness (whose surviving component matches the edge
    trajectory to the same slack)."""
    if not witness.positive:
        return 0.0
    h = float(witness.horizon)
    traj = witness.trajectory
    u_h, v_h, du_h, dv_h = (float(x) for x in traj.eval(h))
    g = geom.tail_flux_length(h)
    t_reb = geom.tail_theta_rebased(h)
    if vanishing == "v":
        return abs(dv_h) * g + u_h ** exps.p * t_reb
    return abs(du_h) * g + v_h ** exps.q * t_reb


def _band_signatures(point_witnesses) -> bool:
    w_m, w_mid, w_M = point_witnesses
    ok_m = (w_m.positive and w_m.enclosure_u.lower > 0.0
            and w_m.enclosure_v.vanishes)
    ok_mid = _certified_positive(w_mid) and not w_mid.enclosure_u.vanishes \
        and not w_mid.enclosure_v.vanishes
    ok_M = (w_M.positive and w_M.enclosure_v.lower > 0.0
            and w_M.enclosure_u.vanishes)
    return bool(ok_m and ok_mid and ok_M)


def find_band(geom: GeometricSummary, exps: ExponentPair, xi: float,
              tol: float = 1e-4, config: IntegratorConfig = DEFAULT_CONFIG,
              warm: Optional[BandPoint] = None) -> BandPoint:
    """Locate the band [eta_m, eta_M] on stochastically incomplete geometry.

    The B <-> positive boundary and positive <-> A boundary are each a
    two-class bisection (the positive set is an interval, so a single
    crossing separates the classes). Edge values are reported on the
    positive side of the final bracket; the returned half widths do not
    include the horizon-truncation bias, which shifts both edges outward
    by at most the certified enclosure width.
    """
    if geom.completeness is not Completeness.INCOMPLETE:
        raise ValueError("find_band requires a stochastically incomplete "
                         "profile; use find_eta on complete ones")
    if not math.isfinite(geom.theta_total):
        raise ValueError("incomplete profile must carry finite theta")
    _require_structure(geom, exps)

    eta_low, eta_high = ab_seed_brackets(geom, exps, xi, config)
    hint = None
    if warm is not None:
        hint = 0.5 * (warm.eta_m + warm.eta_M)
    eta_g, _ = _global_seed(geom, exps, xi, config, eta_low, eta_high, hint)

    lo_m, hi_m = eta_low, eta_g
    lo_M, hi_M = eta_g, eta_high
    if warm is not None:
        cand = (max(eta_low, warm.eta_m - 4.0 * max(warm.width_m, tol)),
                min(eta_g, warm.eta_m + 4.0 * max(warm.width_m, tol)))
        if cand[0] < cand[1]:
            out_lo = integrate_shot(geom, exps, xi, cand[0], config)
            out_hi = integrate_shot(geom, exps, xi, cand[1], config)
            if out_lo.in_b and out_hi.positive:
                lo_m, hi_m = cand
        cand = (max(eta_g, warm.eta_M - 4.0 * max(warm.width_M, tol)),
                min(eta_high, warm.eta_M + 4.0 * max(warm.width_M, tol)))
        if cand[0] < cand[1]:
            out_lo = integrate_shot(geom, exps, xi, cand[0], config)
            out_hi = integrate_shot(geom, exps, xi, cand[1], config)
            if out_lo.positive and out_hi.in_a:
                lo_M, hi_M = cand

    eta_m, width_m, wit_m = _edge_bisect(
        geom, exps, xi, lo_m, hi_m, config, tol,
        OutcomeKind.FIRST_ZERO_V, zero_side_low=True)
    eta_M, width_M, wit_M = _edge_bisect(
        geom, exps, xi, lo_M, hi_M, config, tol,
        OutcomeKind.FIRST_ZERO_U, zero_side_low=False)
    if not eta_m < eta_M:
        raise BracketInvariantBroken(
            f"band edges crossed at xi={xi}: eta_m={eta_m} >= eta_M={eta_M}")
    wit_mid = integrate_shot(geom, exps, xi, 0.5 * (eta_m + eta_M), config)

    # The reported edges are outer approximations: a first-zero beyond the
    # horizon is indistinguishable from a global shot, which biases eta_m
    # down (and eta_M up) by at most the certified enclosure width of the
    # vanishing component at the edge, plus the bisection width. The
    # feasibility constraints of a truly global shot are therefore checked
    # at the nearest point of the slack interval.
    slack_m = _edge_slack(wit_m, geom, exps, vanishing="v") + 2.0 * width_m + tol
    slack_M = _edge_slack(wit_M, geom, exps, vanishing="u") + 2.0 * width_M + tol
    th = geom.theta_total
    p, q = exps.p, exps.q
    feasible = (
        eta_M - slack_M <= th * xi ** p + (xi / th) ** (1.0 / q)
        and xi <= th * (eta_m + slack_m) ** q + ((eta_m + slack_m) / th) ** (1.0 / p)
    )
    signature_ok = _band_signatures((wit_m, wit_mid, wit_M))
    return BandPoint(xi, eta_m, eta_M, width_m, width_M,
                     wit_m, wit_mid, wit_M, signature_ok, feasible)


# ----------------------------------------------------------------------
# region sweep
# ----------------------------------------------------------------------

_CLASS_CODE = {
    OutcomeKind.FIRST_ZERO_U: "A",
    OutcomeKind.FIRST_ZERO_V: "B",
    OutcomeKind.POSITIVE_TO_HORIZON: "G",
}


def _classify_cell(geom, exps, xi, eta, config):
    try:
        out = integrate_shot(geom, exps, xi, eta, config)
    except IntegrationError as err:
        return ("!", math.nan, f"error:{type(err).__name__}",
                (math.nan,) * 4, (False, False))
    code = _CLASS_CODE[out.kind]
    enc = (math.nan,) * 4
    van = (False, False)
    if out.positive:
        enc = (out.enclosure_u.lower, out.enclosure_u.upper,
               out.enclosure_v.lower, out.enclosure_v.upper)
        van = (out.enclosure_u.vanishes, out.enclosure_v.vanishes)
    return (code, _survival_radius(out), "ok", enc, van)


def _sweep_worker(args):
    spec, p, q, n, config, cells = args
    profile = profile_from_spec(spec)
    geom = summarize(profile)
    exps = make_exponents(p, q, n)
    return [_classify_cell(geom, exps, xi, eta, config) for (xi, eta) in cells]


def sweep_region(geom: GeometricSummary, exps: ExponentPair,
                 xi_range: tuple[float, float], eta_range: tuple[float, float],
                 resolution: int | tuple[int, int],
                 config: IntegratorConfig = DEFAULT_CONFIG,
                 workers: int = 1) -> RegionMap:
    """Classify every cell of the grid; cells are independent shots.

    With ``workers > 1`` and a builtin profile the cells are distributed
    over a process pool (profiles travel as their constructor spec);
    otherwise the sweep runs serially. Per-cell integrator failures are
    recorded in the map, never raised.
    """
    if isinstance(resolution, int):
        nx = ny = resolution
    else:
        nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 per axis")
    if min(xi_range) <= 0 or min(eta_range) <= 0:
        raise ValueError("ranges must be positive")
    xis = np.linspace(xi_range[0], xi_range[1], nx)
    etas = np.linspace(eta_range[0], eta_range[1], ny)
    cells = [(float(x), float(e)) for x in xis for e in etas]

    if workers > 1 and geom.profile.spec is None:
        warnings.warn("profile is not spec-reconstructible; sweeping serially")
        workers = 1

    if workers > 1:
        chunks = np.array_split(np.arange(len(cells)), workers * 4)
        args = [(geom.profile.spec, exps.p, exps.q, geom.profile.n, config,
                 [cells[i] for i in idx]) for idx in chunks if len(idx)]
        results: list = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_sweep_worker, args):
                results.extend(part)
    else:
        results = [_classify_cell(geom, exps, xi, eta, config)
                   for (xi, eta) in cells]

    classes = np.empty((nx, ny), dtype="<U1")
    horizons = np.empty((nx, ny))
    status = np.empty((nx, ny), dtype=object)
    enc = [np.full((nx, ny), math.nan) for _ in range(4)]
    van_u = np.zeros((nx, ny), dtype=bool)
    van_v = np.zeros((nx, ny), dtype=bool)
    for k, (code, rad, st, bounds, van) in enumerate(results):
        i, j = divmod(k, ny)
        classes[i, j] = code
        horizons[i, j] = rad
        status[i, j] = st
        for m in range(4):
            enc[m][i, j] = bounds[m]
        van_u[i, j], van_v[i, j] = van
    return RegionMap(xis, etas, classes, horizons, status, *enc,
                     van_u=van_u, van_v=van_v)


def refine_boundaries(region: RegionMap, geom: GeometricSummary,
                      exps: ExponentPair,
                      config: IntegratorConfig = DEFAULT_CONFIG,
                      steps: int = 6) -> list[tuple[float, float, float, str, str]]:
    """Bisect across each classification change within a column.

    Returns rows (xi, eta_low, eta_high, class_below, class_above) with
    eta_high - eta_low shrunk by 2^-steps of the original cell height.
    """
    out = []
    for i, xi in enumerate(region.xis):
        col = region.classes[i, :]
        for j in range(len(region.etas) - 1):
            if col[j] == col[j + 1] or "!" in (col[j], col[j + 1]):
                continue
            lo, hi = float(region.etas[j]), float(region.etas[j + 1])
            c_lo = col[j]
            for _ in range(steps):
                mid = 0.5 * (lo + hi)
                code, _, st, _, _ = _classify_cell(geom, exps, float(xi), mid, config)
                if st != "ok":
                    break
                if code == c_lo:
                    lo = mid
                else:
                    hi = mid
            out.append((float(xi), lo, hi, col[j], col[j + 1]))
    return out


# ----------------------------------------------------------------------
# tracing along a grid of xi
# ----------------------------------------------------------------------

def curve_trace(geom: GeometricSummary, exps: ExponentPair,
                xi_grid: Sequence[float], tol: float = 1e-6,
                config: IntegratorConfig = DEFAULT_CONFIG
                ) -> list[CurvePoint] | list[BandPoint]:
    """Trace eta(xi) or the band edges over a strictly increasing grid.

    Brackets are warm-started from the previous point and fall back to the
    guaranteed seeds when the warm bracket misclassifies. Monotonicity of
    the traced values is asserted.
    """
    xi_grid = [float(x) for x in xi_grid]
    if any(b <= a for a, b in zip(xi_grid, xi_grid[1:])):
        raise ValueError("xi grid must be strictly increasing")
    complete = geom.completeness is Completeness.COMPLETE
    points: list = []
    for xi in xi_grid:
        if complete:
            bracket = None
            if points:
                prev = points[-1]
                w = max(prev.bracket_width, tol)
                bracket = (prev.eta - 4.0 * w, prev.eta + 4.0 * w)
            points.append(find_eta(geom, exps, xi, tol, config, bracket=bracket))
        else:
            warm = points[-1] if points else None
            points.append(find_band(geom, exps, xi, tol, config, warm=warm))

    def check_increasing(vals, label):
        for (x1, v1), (x2, v2) in zip(vals, vals[1:]):
            if not v2 > v1:
                raise MonotonicityViolation(
                    f"{label} failed to increase between xi={x1} and xi={x2}: "
                    f"{v1} -> {v2} (tolerance too loose?)")

    if complete:
        check_increasing([(p.xi, p.eta) for p in points], "eta(xi)")
    else:
        check_increasing([(p.xi, p.eta_m) for p in points], "eta_m(xi)")
        check_increasing([(p.xi, p.eta_M) for p in points], "eta_M(xi)")
    return points


def fit_power_law(xis: Sequence[float], etas: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope and multiplier of eta = c xi^slope (log-log fit)."""
    x = np.log(np.asarray(xis, dtype=float))
    y = np.log(np.asarray(etas, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(math.exp(intercept))
