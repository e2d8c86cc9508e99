"""Conserved and monotone quantities along trajectories.

For a trajectory (u, v) of the radial system the scan evaluates

    F(r) = u'v' + |u|^(p+1)/(p+1) + |v|^(q+1)/(q+1)
    P(r) = V(r) F(r) + psi^(n-1) (u v'/(p+1) + u' v/(q+1))
    K(r) = (1/(p+1) + 1/(q+1) - (n-2)/n) psi^(n-1)
           - (2(n-1)/n) (int_0^r psi^n psi''/(psi')^2 ds) psi'/psi

with V the ball volume. The two derivative identities

    F' = -2(n-1) (psi'/psi) u'v'       P' = K u'v'

hold exactly along solutions and are verified against small-step central
differences. On convex-certified geometry in the critical-supercritical
regime K <= 0, so P starts at zero, never increases, and stays nonpositive
on the positivity interval; this is the mechanism that forbids simultaneous
zeros of the two components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EnclosureTooWide
from .manifold import GeometricSummary, ball_volume, curvature_integrand
from .quadrature import adaptive_quad, gauss_panel, panel_points
from .shooting import ExponentPair, ShotOutcome, Trajectory

# a component "vanishes" when its enclosure cannot exclude zero and its value
# at the horizon is inside a few certified widths of zero (tail-driven decay)
_VANISH_WIDTH_FACTOR = 3.0
# instantaneous log-log slope below which a component still visibly decays
_DECAY_SLOPE = -0.05
# hard extinction relative to the initial value
_EXTINCTION = 1e-6


@dataclass(frozen=True)
class PohozaevSample:
    r: float
    F: float
    P: float
    K: float


@dataclass
class PohozaevScan(Sequence):
    """Sequence of :class:`PohozaevSample` plus identity-check residuals."""

    r: np.ndarray
    F: np.ndarray
    P: np.ndarray
    K: np.ndarray
    energy_identity_residual: float
    pohozaev_identity_residual: float

    def __len__(self):
        return len(self.r)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return PohozaevSample(float(self.r[i]), float(self.F[i]),
                              float(self.P[i]), float(self.K[i]))

    @property
    def max_p(self) -> float:
        return float(np.max(self.P))

    @property
    def max_p_increment(self) -> float:
        return float(np.max(np.diff(self.P))) if len(self.P) > 1 else 0.0


def _scan_nodes(trajectory: Trajectory, geom: GeometricSummary) -> np.ndarray:
    """Trajectory sample nodes clipped to the flux-representable zone."""
    r = trajectory.r
    mask = r <= geom.flux_safe_radius
    return r[mask]


def pohozaev_scan(trajectory: Trajectory, geom: GeometricSummary,
                  exps: ExponentPair, identity_checkpoints: int = 48,
                  identity_tol: Optional[float] = None) -> PohozaevScan:
    """Evaluate F, P, K at the trajectory nodes and verify the identities.

    Cumulative quadratures (ball volume, curvature integral) use one fixed
    Gauss panel per step interval, which is exact to machine precision at
    the resolution of the step sequence. The derivative identities are
    checked at a subset of nodes with adaptive-width central differences of
    F and P against their closed forms.
    """
    profile = geom.profile
    p, q, n = exps.p, exps.q, profile.n
    nodes = _scan_nodes(trajectory, geom)
    states = trajectory.eval(nodes)
    u, v, du, dv = states

    weight = lambda s: np.exp(profile.log_weight(s))
    vol = _cumulative(weight, nodes, head=ball_volume(profile, float(nodes[0])))

    kernel_f = lambda s: curvature_integrand(profile, s)
    head = adaptive_quad(kernel_f, 0.0, float(nodes[0]),
                         rel_tol=1e-9, abs_floor=1e-14)
    curv = _cumulative(kernel_f, nodes, head=head)

    w_nodes = weight(nodes)
    gap = 1.0 / (p + 1.0) + 1.0 / (q + 1.0) - (n - 2.0) / n
    F = du * dv + np.abs(u) ** (p + 1.0) / (p + 1.0) + np.abs(v) ** (q + 1.0) / (q + 1.0)
    P = vol * F + w_nodes * (u * dv / (p + 1.0) + du * v / (q + 1.0))
    K = gap * w_nodes - (2.0 * (n - 1.0) / n) * curv \
        * profile.psi_prime(nodes) / profile.psi(nodes)

    res_f, res_p = _identity_residuals(
        trajectory, geom, exps, nodes, vol, curv, identity_checkpoints)
    if identity_tol is not None and max(res_f, res_p) > identity_tol:
        raise ValueError(
            f"derivative-identity residual {max(res_f, res_p):.3e} above "
            f"tolerance {identity_tol:.3e}")
    return PohozaevScan(nodes, F, P, K, res_f, res_p)


def _cumulative(f, nodes: np.ndarray, head: float) -> np.ndarray:
    from .quadrature import cumulative_gauss
    return cumulative_gauss(f, nodes, initial=head)


def _identity_residuals(trajectory, geom, exps, nodes, vol, curv,
                        num_checkpoints) -> tuple[float, float]:
    profile = geom.profile
    p, q, n = exps.p, exps.q, profile.n
    if len(nodes) < 3:
        return 0.0, 0.0
    idx = np.unique(np.linspace(1, len(nodes) - 2, num_checkpoints).astype(int))
    gap = 1.0 / (p + 1.0) + 1.0 / (q + 1.0) - (n - 2.0) / n
    res_f = res_p = 0.0
    weight = lambda s: np.exp(profile.log_weight(s))

    for i in idx:
        r = float(nodes[i])
        h = 6e-6 * max(1.0, r)
        if r - h <= nodes[0] or r + h >= nodes[-1]:
            continue
        um, vm, dum, dvm = trajectory.eval(r - h)
        up, vp, dup, dvp = trajectory.eval(r + h)
        u, v, du, dv = trajectory.eval(r)

        f_m = dum * dvm + abs(um) ** (p + 1) / (p + 1) + abs(vm) ** (q + 1) / (q + 1)
        f_p = dup * dvp + abs(up) ** (p + 1) / (p + 1) + abs(vp) ** (q + 1) / (q + 1)
        lam = profile.lam(r)
        rhs_f = -2.0 * lam * du * dv
        fd_f = (f_p - f_m) / (2.0 * h)
        res_f = max(res_f, abs(fd_f - rhs_f) / (1.0 + abs(rhs_f)))

        w_r = float(weight(r))
        vol_m = vol[i] - gauss_panel(weight, r - h, r)
        vol_p = vol[i] + gauss_panel(weight, r, r + h)
        p_m = vol_m * f_m + float(weight(r - h)) * (um * dvm / (p + 1) + dum * vm / (q + 1))
        p_p = vol_p * f_p + float(weight(r + h)) * (up * dvp / (p + 1) + dup * vp / (q + 1))
        k_r = gap * w_r - (2.0 * (n - 1.0) / n) * curv[i] \
            * float(profile.psi_prime(r)) / float(profile.psi(r))
        rhs_p = k_r * du * dv
        fd_p = (p_p - p_m) / (2.0 * h)
        res_p = max(res_p, abs(fd_p - rhs_p) / (1.0 + abs(rhs_p)))
    return float(res_f), float(res_p)


# ----------------------------------------------------------------------
# limit enclosures
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LimitEnclosure:
    """Certified interval for the limit of one component at infinity.

    On incomplete profiles the interval comes from the monotone tail bound:
    the drop of v beyond the horizon H is at most the inherited flux
    |v'(H)| g(H) plus sup-forcing u(H)^p T(H), with g the tail flux length
    and T the rebased tail ratio mass (both pure geometry). The bound is
    nested inside the cruder xi^p int_H^inf Theta form since u(H) <= xi.
    On complete profiles the limit is zero whenever the trajectory is
    globally positive, so the enclosure is [0, value] and ``vanishes``
    reports whether the tail still visibly decays (or went extinct).
    """

    lower: float
    upper: float
    vanishes: bool


def _vanish_verdict_incomplete(value, width, initial) -> bool:
    lower_raw = value - width
    return lower_raw <= 0.0 and value <= max(_VANISH_WIDTH_FACTOR * width,
                                             _EXTINCTION * initial)


def _vanish_verdict_complete(value, slope, initial) -> bool:
    if value <= _EXTINCTION * initial:
        return True
    return slope <= _DECAY_SLOPE


def limit_enclosure(outcome: ShotOutcome, geom: GeometricSummary,
                    exps: ExponentPair, xi: float, eta: float,
                    max_width: Optional[float] = None
                    ) -> tuple[LimitEnclosure, LimitEnclosure]:
    """Enclosures (for u, for v) of a positive-to-horizon outcome."""
    if not outcome.positive:
        raise ValueError("limit enclosures apply to positive-to-horizon shots")
    traj = outcome.trajectory
    h = float(outcome.horizon)
    u_h, v_h, du_h, dv_h = (float(x) for x in traj.eval(h))

    if geom.incomplete:
        g = geom.tail_flux_length(h)
        t_reb = geom.tail_theta_rebased(h)
        width_u = abs(du_h) * g + v_h ** exps.q * t_reb
        width_v = abs(dv_h) * g + u_h ** exps.p * t_reb
        if max_width is not None and max(width_u, width_v) > max_width:
            raise EnclosureTooWide(
                f"certified widths ({width_u:.3e}, {width_v:.3e}) exceed "
                f"{max_width:.3e}; extend the horizon")
        enc_u = LimitEnclosure(max(0.0, u_h - width_u), u_h,
                               _vanish_verdict_incomplete(u_h, width_u, xi))
        enc_v = LimitEnclosure(max(0.0, v_h - width_v), v_h,
                               _vanish_verdict_incomplete(v_h, width_v, eta))
        return enc_u, enc_v

    # Decay slopes are read well inside the horizon: a shot this close to
    # the existence curve tracks the globally positive solution only up to
    # a fraction of the radius where it finally classifies, and right at
    # that edge the surviving component flattens toward its pseudo-limit.
    r_s = min(h, max(h / 8.0, 4.0 * float(traj.r[0])))
    u_s, v_s, du_s, dv_s = (float(x) for x in traj.eval(r_s))
    slope_u = r_s * du_s / u_s if u_s > 0 else -math.inf
    slope_v = r_s * dv_s / v_s if v_s > 0 else -math.inf
    enc_u = LimitEnclosure(0.0, u_h, _vanish_verdict_complete(u_h, slope_u, xi))
    enc_v = LimitEnclosure(0.0, v_h, _vanish_verdict_complete(v_h, slope_v, eta))
    return enc_u, enc_v


# ----------------------------------------------------------------------
# explicit limit bounds (incomplete profiles, pq > 1)
# ----------------------------------------------------------------------

def limit_upper_bounds(exps: ExponentPair, theta: float) -> tuple[float, float]:
    """Explicit upper bounds for (limit of u, limit of v) in terms of the
    total ratio mass theta; only the exponents enter the coefficients."""
    p, q = exps.p, exps.q
    pq1 = p * q - 1.0
    if pq1 <= 0:
        raise ValueError("bounds require pq > 1")
    bound_u = (p ** ((q + 1.0) / pq1) * (q + 1.0) ** ((q + 2.0) / pq1)
               / ((p + 1.0) ** (1.0 / pq1) * pq1 ** ((q + 1.0) / pq1))
               * theta ** (-(q + 1.0) / pq1))
    bound_v = (q ** ((p + 1.0) / pq1) * (p + 1.0) ** ((p + 2.0) / pq1)
               / ((q + 1.0) ** (1.0 / pq1) * pq1 ** ((p + 1.0) / pq1))
               * theta ** (-(p + 1.0) / pq1))
    return bound_u, bound_v


@dataclass(frozen=True)
class BoundCheck:
    satisfied: bool
    bound_u: float
    bound_v: float
    margin: float    # min(bound - upper) when satisfied
    excess: float    # max(upper - bound) when violated, else 0


def abs_bound_check(enclosures: tuple[LimitEnclosure, LimitEnclosure],
                    exps: ExponentPair, theta: float) -> BoundCheck:
    """Compare enclosure uppers against the explicit limit bounds."""
    if not math.isfinite(theta):
        raise ValueError("bounds require finite theta (incomplete profile)")
    bound_u, bound_v = limit_upper_bounds(exps, theta)
    enc_u, enc_v = enclosures
    d_u = bound_u - enc_u.upper
    d_v = bound_v - enc_v.upper
    if d_u >= 0 and d_v >= 0:
        return BoundCheck(True, bound_u, bound_v, margin=min(d_u, d_v), excess=0.0)
    return BoundCheck(False, bound_u, bound_v, margin=0.0,
                      excess=max(-d_u, -d_v, 0.0))


# ----------------------------------------------------------------------
# energy ledger
# ----------------------------------------------------------------------

@dataclass
class EnergyLedger:
    """Cumulative energies at increasing checkpoints with identity residuals.

    i_mixed(R) = int_0^R u'v' W,  i_u(R) = int_0^R |u|^(p+1) W,
    i_v(R) = int_0^R |v|^(q+1) W, all per unit solid angle. The residuals
    are the integration-by-parts identities

        i_v(R) = i_mixed(R) - W(R) u'(R) v(R)
        i_u(R) = i_mixed(R) - W(R) u(R) v'(R)

    normalized by the respective right-hand component energy.
    """

    checkpoints: np.ndarray
    i_mixed: np.ndarray
    i_u: np.ndarray
    i_v: np.ndarray
    residual_u: np.ndarray
    residual_v: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(max(np.max(self.residual_u), np.max(self.residual_v)))


def energy_ledger(trajectory: Trajectory, geom: GeometricSummary,
                  exps: ExponentPair, checkpoints) -> EnergyLedger:
    """Cumulative quadrature of the three energies at the checkpoints."""
    profile = geom.profile
    p, q = exps.p, exps.q
    checkpoints = np.sort(np.asarray(checkpoints, dtype=float))
    if checkpoints[-1] > trajectory.r[-1] + 1e-12:
        raise ValueError("checkpoint beyond trajectory end")
    if checkpoints[-1] > geom.flux_safe_radius:
        raise ValueError("checkpoint beyond the flux-representable zone")

    base = _scan_nodes(trajectory, geom)
    nodes = np.unique(np.concatenate([
        base[base <= checkpoints[-1]], checkpoints]))

    def chunk(a, b):
        pts, wts = panel_points(a, b)
        u, v, du, dv = trajectory.eval(pts)
        w = np.exp(profile.log_weight(pts))
        return (np.sum(wts * du * dv * w),
                np.sum(wts * np.abs(u) ** (p + 1.0) * w),
                np.sum(wts * np.abs(v) ** (q + 1.0) * w))

    # series head below the first trajectory node (psi ~ r there)
    n = profile.n
    r0 = float(nodes[0])
    u0, v0 = (abs(float(x)) for x in trajectory.eval(r0)[:2])
    acc = np.array([
        u0 ** p * v0 ** q * r0 ** (n + 2) / ((n + 2.0) * n * n),
        u0 ** (p + 1.0) * r0 ** n / n,
        v0 ** (q + 1.0) * r0 ** n / n,
    ])
    cum = {r0: acc.copy()}
    for a, b in zip(nodes[:-1], nodes[1:]):
        acc += np.array(chunk(float(a), float(b)))
        cum[float(b)] = acc.copy()

    i_mixed = np.array([cum[float(c)][0] for c in checkpoints])
    i_u = np.array([cum[float(c)][1] for c in checkpoints])
    i_v = np.array([cum[float(c)][2] for c in checkpoints])

    res_u = np.empty_like(i_u)
    res_v = np.empty_like(i_v)
    for k, c in enumerate(checkpoints):
        u, v, du, dv = (float(x) for x in trajectory.eval(float(c)))
        w = math.exp(float(profile.log_weight(float(c))))
        den_v = max(abs(i_v[k]), abs(i_mixed[k]), abs(w * du * v), 1e-30)
        den_u = max(abs(i_u[k]), abs(i_mixed[k]), abs(w * u * dv), 1e-30)
        res_v[k] = abs(i_mixed[k] - w * du * v - i_v[k]) / den_v
        res_u[k] = abs(i_mixed[k] - w * u * dv - i_u[k]) / den_u
    return EnergyLedger(checkpoints, i_mixed, i_u, i_v, res_u, res_v)


def divergence_verdict(ledger: EnergyLedger, reference: float,
                       factor: float = 10.0) -> bool:
    """Finite-horizon proxy for an infinite energy: the cumulative mixed
    energy must be increasing, exceed ``factor`` times the reference, and
    still be growing over the trailing checkpoints (no flattening)."""
    i = ledger.i_mixed
    if len(i) < 3:
        return False
    increasing = bool(np.all(np.diff(i) > 0))
    exceeded = i[-1] >= factor * reference
    growing = i[-1] > 1.5 * i[len(i) // 2]
    return increasing and exceeded and growing


# ----------------------------------------------------------------------
# flux-form residual (integral identity along the trajectory)
# ----------------------------------------------------------------------

def flux_residual(trajectory: Trajectory, geom: GeometricSummary,
                  exps: ExponentPair, num_checkpoints: int = 24) -> float:
    """Max normalized residual of pu(r) = -int_0^r |v|^(q-1) v W ds.

    Checked at checkpoints inside the flux-representable zone; the residual
    is normalized by 1 + |pu|.
    """
    profile = geom.profile
    q = exps.q
    nodes = _scan_nodes(trajectory, geom)
    if len(nodes) < 2:
        return 0.0

    def integrand(s):
        u, v, du, dv = trajectory.eval(s)
        return np.sign(v) * np.abs(v) ** q * np.exp(profile.log_weight(s))

    cum = _cumulative(integrand, nodes,
                      head=float(nodes[0]) ** profile.n / profile.n
                      * np.sign(trajectory.v[0]) * abs(trajectory.v[0]) ** q)
    idx = np.unique(np.linspace(0, len(nodes) - 1, num_checkpoints).astype(int))
    worst = 0.0
    for i in idx:
        r = float(nodes[i])
        u, v, du, dv = (float(x) for x in trajectory.eval(r))
        pu = math.exp(float(profile.log_weight(r))) * du
        worst = max(worst, float(abs(pu + cum[i])) / (1.0 + abs(pu)))
    return float(worst)
