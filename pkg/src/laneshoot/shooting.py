"""Radial Cauchy shots for the coupled Lane-Emden system.

The shot integrates, from initial heights (xi, eta) at the pole,

    (psi^(n-1) u')' = -psi^(n-1) |v|^(q-1) v
    (psi^(n-1) v')' = -psi^(n-1) |u|^(p-1) u
    u(0) = xi, v(0) = eta, u'(0) = v'(0) = 0,

and classifies the trajectory by the first component to cross zero:
first zero of u is membership in set A of the initial-data plane, first zero
of v membership in set B, and surviving to the horizon is the finite proxy
for a globally positive solution.

Integration is carried in the flux variables (u, v, pu, pv) with
pu = psi^(n-1) u': the flux form is non-singular away from the pole and
keeps the integral identity pu(r) = -int_0^r |v|^(q-1) v psi^(n-1) ds exact
in structure. On profiles whose surface weight grows fast, the flux
variables leave double range long before the interesting radii, so once
psi^(n-1) exceeds a switch weight the state is converted exactly to
(u, v, u', v') and continued with an implicit stepper (the damped radial
drift makes explicit steppers step-size limited there).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import DOP853, LSODA, OdeSolution
from scipy.optimize import brentq

from .errors import (BracketConfirmationFailed, MaxStepsExceeded,
                     SimultaneousZero, StepSizeUnderflow)
from .manifold import Completeness, GeometricSummary

__all__ = [
    "Regime", "ExponentPair", "make_exponents", "IntegratorConfig",
    "ShotState", "Trajectory", "OutcomeKind", "ShotOutcome",
    "origin_series", "integrate_shot", "ab_seed_brackets",
]


class Regime(Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


_CRITICAL_TOL = 1e-12


@dataclass(frozen=True)
class ExponentPair:
    """Nonlinearity exponents (p, q) with their regime for a dimension n.

    The regime compares 1/(p+1) + 1/(q+1) against (n-2)/n; equality within
    1e-12 is critical, below is supercritical. In the critical-supercritical
    range pq > 1 automatically (the inverse sum is then below 1).
    """

    p: float
    q: float
    regime: Regime

    @property
    def critical_supercritical(self) -> bool:
        return self.regime is not Regime.SUBCRITICAL

    def swapped(self) -> "ExponentPair":
        return ExponentPair(self.q, self.p, self.regime)


def criticality_gap(p: float, q: float, n: int) -> float:
    """1/(p+1) + 1/(q+1) - (n-2)/n; nonpositive in the regime of interest."""
    return 1.0 / (p + 1.0) + 1.0 / (q + 1.0) - (n - 2.0) / n


def make_exponents(p: float, q: float, n: int) -> ExponentPair:
    if p <= 0 or q <= 0:
        raise ValueError("exponents must be positive")
    gap = criticality_gap(p, q, n)
    if abs(gap) <= _CRITICAL_TOL:
        regime = Regime.CRITICAL
    elif gap < 0:
        regime = Regime.SUPERCRITICAL
    else:
        regime = Regime.SUBCRITICAL
    pair = ExponentPair(float(p), float(q), regime)
    if pair.critical_supercritical:
        assert p * q > 1.0, "pq > 1 must hold for critical-supercritical pairs"
    return pair


def critical_partner(p: float, n: int) -> float:
    """The q making (p, q) critical in dimension n."""
    inv = (n - 2.0) / n - 1.0 / (p + 1.0)
    if inv <= 0:
        raise ValueError(f"no critical partner for p={p} in dimension {n}")
    return 1.0 / inv - 1.0


@dataclass(frozen=True)
class IntegratorConfig:
    """Error control and stopping policy of one shot.

    ``horizon=None`` uses the profile's default: 1000 on stochastically
    complete profiles (with early stop if both components go extinct), and
    the radius where the tail mass of the volume-surface ratio drops below
    2e-2 on incomplete ones.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    horizon: Optional[float] = None
    r0_scale: float = 1.0
    positivity_margin: float = 1e-12   # times max(xi, eta)
    max_steps: int = 500_000
    switch_weight: float = 1e8         # flux -> derivative form hand-off
    deep_rel_tol: Optional[float] = None   # defaults to rel_tol
    extinction: float = 1e-6           # times initial value, early-stop pair


DEFAULT_CONFIG = IntegratorConfig()

# loosened control for region sweeps where only the classification matters
SWEEP_CONFIG = IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10)


@dataclass(frozen=True)
class ShotState:
    """One record of the shot: fluxes pu, pv are psi^(n-1) u', psi^(n-1) v'.

    On the positivity interval both fluxes are strictly negative away from
    the pole. At radii beyond double range for the surface weight the flux
    entries saturate to -inf; diagnostics never read them there.
    """

    r: float
    u: float
    v: float
    pu: float
    pv: float


class _FluxRhs:
    def __init__(self, log_weight, p, q):
        self.log_weight = log_weight
        self.p = p
        self.q = q

    def __call__(self, r, y):
        u, v, pu, pv = y
        # clamped so that step-size probes beyond the switch zone return
        # huge-but-finite slopes instead of overflowing; accepted steps
        # never get here because the hand-off happens at a weight of ~1e8
        w = math.exp(min(float(self.log_weight(r)), 700.0))
        return np.array([
            pu / w,
            pv / w,
            -math.copysign(abs(v) ** self.q, v) * w,
            -math.copysign(abs(u) ** self.p, u) * w,
        ])


class _DerivRhs:
    """Second-order form u'' = -(n-1)(psi'/psi) u' - |v|^(q-1) v."""

    def __init__(self, lam, p, q):
        self.lam = lam
        self.p = p
        self.q = q

    def __call__(self, r, y):
        u, v, du, dv = y
        l = self.lam(r)
        return np.array([
            du,
            dv,
            -l * du - math.copysign(abs(v) ** self.q, v),
            -l * dv - math.copysign(abs(u) ** self.p, u),
        ])

    def jac(self, r, y):
        u, v, du, dv = y
        l = self.lam(r)
        return np.array([
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, -self.q * abs(v) ** (self.q - 1.0), -l, 0.0],
            [-self.p * abs(u) ** (self.p - 1.0), 0.0, 0.0, -l],
        ])


@dataclass
class Trajectory:
    """Dense record of one shot.

    ``r`` and the component arrays hold the accepted solver steps;
    ``eval`` interpolates (u, v, u', v') anywhere inside, matching the
    samples exactly at the nodes. ``switch_radius`` marks the hand-off
    from flux to derivative state, if it happened.
    """

    r: np.ndarray
    u: np.ndarray
    v: np.ndarray
    du: np.ndarray
    dv: np.ndarray
    horizon: float
    profile_log_weight: Callable
    switch_radius: Optional[float] = None
    _flux_sol: Optional[OdeSolution] = None
    _deriv_sol: Optional[OdeSolution] = None

    def eval(self, r):
        """Interpolated (u, v, u', v') at scalar or array ``r``.

        Queries below the series hand-off radius are clamped to it (the
        state there differs from the pole values by O(r0^2)).
        """
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        r_arr = np.clip(r_arr, self.r[0], None)
        out = np.empty((4, r_arr.size))
        cut = self.switch_radius if self.switch_radius is not None else np.inf
        flux_mask = r_arr <= cut
        if flux_mask.any():
            y = self._flux_sol(r_arr[flux_mask])
            w = np.exp(self.profile_log_weight(r_arr[flux_mask]))
            out[0, flux_mask] = y[0]
            out[1, flux_mask] = y[1]
            out[2, flux_mask] = y[2] / w
            out[3, flux_mask] = y[3] / w
        if (~flux_mask).any():
            out[:, ~flux_mask] = self._deriv_sol(r_arr[~flux_mask])
        if np.isscalar(r) or np.ndim(r) == 0:
            return out[:, 0]
        return out

    def state_at(self, r: float) -> ShotState:
        u, v, du, dv = self.eval(float(r))
        lw = float(self.profile_log_weight(r))
        if lw > 700.0:
            pu, pv = -math.inf, -math.inf
        else:
            w = math.exp(lw)
            pu, pv = w * du, w * dv
        return ShotState(float(r), float(u), float(v), float(pu), float(pv))

    @property
    def samples(self) -> list[ShotState]:
        return [self.state_at(float(r)) for r in self.r]


class OutcomeKind(Enum):
    FIRST_ZERO_U = "first_zero_u"     # set A
    FIRST_ZERO_V = "first_zero_v"     # set B
    POSITIVE_TO_HORIZON = "positive_to_horizon"


@dataclass
class ShotOutcome:
    """Classification of one shot, with the evidence attached.

    For first-zero outcomes ``zero_radius`` is the crossing radius and
    ``other_value`` the surviving component there (provably positive for
    critical-supercritical exponents). Positive-to-horizon outcomes carry
    limit enclosures for both components.
    """

    kind: OutcomeKind
    xi: float
    eta: float
    trajectory: Trajectory
    zero_radius: Optional[float] = None
    other_value: Optional[float] = None
    horizon: Optional[float] = None
    enclosure_u: Optional[object] = None   # diagnostics.LimitEnclosure
    enclosure_v: Optional[object] = None

    @property
    def in_a(self) -> bool:
        return self.kind is OutcomeKind.FIRST_ZERO_U

    @property
    def in_b(self) -> bool:
        return self.kind is OutcomeKind.FIRST_ZERO_V

    @property
    def positive(self) -> bool:
        return self.kind is OutcomeKind.POSITIVE_TO_HORIZON


def default_r0(xi: float, eta: float, p: float, q: float, scale: float = 1.0) -> float:
    """Hand-off radius for the origin series.

    Shrinks with the initial heights so the quartic truncation term stays
    below integrator tolerance even for steep nonlinearities.
    """
    return scale * 1e-6 * max(1.0, xi, eta) ** (-max(p, q) / 2.0)


def origin_series(profile, exps: ExponentPair, xi: float, eta: float,
                  r0: float) -> ShotState:
    """Series start at a small radius r0.

    With psi ~ r near the pole,

        u(r)  = xi  - eta^q r^2/(2n) + O(r^4)
        pu(r) = -eta^q r^n / n       + O(r^(n+2))

    and symmetrically for v with xi^p. The truncation is quartic in r0,
    so the default r0 keeps it far below the integrator tolerance.
    """
    if xi <= 0 or eta <= 0:
        raise ValueError("initial heights must be positive")
    n = profile.n
    p, q = exps.p, exps.q
    u0 = xi - eta ** q * r0 ** 2 / (2.0 * n)
    v0 = eta - xi ** p * r0 ** 2 / (2.0 * n)
    pu0 = -eta ** q * r0 ** n / n
    pv0 = -xi ** p * r0 ** n / n
    return ShotState(r0, u0, v0, pu0, pv0)


def _refine_crossing(dense, component: int, margin: float,
                     a: float, b: float) -> Optional[float]:
    f = lambda r: dense(r)[component] - margin
    fa, fb = f(a), f(b)
    if fa <= 0.0:
        return a
    if fb > 0.0:
        return None
    return brentq(f, a, b, xtol=1e-12, rtol=8.9e-16)


def integrate_shot(geom: GeometricSummary, exps: ExponentPair,
                   xi: float, eta: float,
                   config: IntegratorConfig = DEFAULT_CONFIG) -> ShotOutcome:
    """Integrate one shot and classify it.

    An error-controlled one-step method advances from the series start,
    monitoring the sign of both components at every accepted step. A
    bracketed crossing is refined on the step's dense interpolant; if both
    components crossed, the earlier crossing wins, and if the surviving
    component is itself below the margin at that radius the step controller
    was too loose (raises :class:`SimultaneousZero`, impossible exactly).
    Surviving to the horizon yields a positive-to-horizon outcome with
    certified limit enclosures attached.
    """
    if xi <= 0 or eta <= 0:
        raise ValueError("initial heights must be positive")
    if config.horizon is not None and config.horizon <= 0:
        raise ValueError("horizon must be positive")
    profile = geom.profile
    p, q = exps.p, exps.q
    horizon = config.horizon if config.horizon is not None else geom.default_horizon

    r0 = default_r0(xi, eta, p, q, config.r0_scale)
    start = origin_series(profile, exps, xi, eta, r0)
    margin = config.positivity_margin * max(xi, eta)
    extinct_u = config.extinction * xi
    extinct_v = config.extinction * eta
    log_switch = math.log(config.switch_weight)
    deep_rtol = config.deep_rel_tol if config.deep_rel_tol is not None else config.rel_tol

    flux_rhs = _FluxRhs(profile.log_weight, p, q)
    solver = DOP853(flux_rhs, r0, np.array([start.u, start.v, start.pu, start.pv]),
                    horizon, rtol=config.rel_tol, atol=config.abs_tol,
                    first_step=r0)
    mode = "flux"

    rs = [r0]
    states = [np.array([start.u, start.v, start.pu / math.exp(profile.log_weight(r0)),
                        start.pv / math.exp(profile.log_weight(r0))])]
    flux_ts, flux_interp = [r0], []
    deriv_ts, deriv_interp = [], []
    switch_radius = None
    steps = 0

    def build_trajectory(end: float) -> Trajectory:
        arr = np.array(states)
        traj = Trajectory(
            r=np.array(rs), u=arr[:, 0], v=arr[:, 1], du=arr[:, 2], dv=arr[:, 3],
            horizon=end, profile_log_weight=profile.log_weight,
            switch_radius=switch_radius,
            _flux_sol=OdeSolution(flux_ts, flux_interp) if flux_interp else None,
            _deriv_sol=OdeSolution(deriv_ts, deriv_interp) if deriv_interp else None,
        )
        return traj

    def record(r, y):
        if mode == "flux":
            w = math.exp(profile.log_weight(r))
            states.append(np.array([y[0], y[1], y[2] / w, y[3] / w]))
        else:
            states.append(np.asarray(y, dtype=float).copy())
        rs.append(r)

    def finish_zero(dense, a, b, y_end):
        ru = _refine_crossing(dense, 0, margin, a, b) if y_end[0] <= margin else None
        rv = _refine_crossing(dense, 1, margin, a, b) if y_end[1] <= margin else None
        if ru is None and rv is None:
            return None
        if ru is not None and (rv is None or ru <= rv):
            kind, r_zero, other_idx = OutcomeKind.FIRST_ZERO_U, ru, 1
        else:
            kind, r_zero, other_idx = OutcomeKind.FIRST_ZERO_V, rv, 0
        y_zero = dense(r_zero)
        other = float(y_zero[other_idx])
        if other <= margin:
            raise SimultaneousZero(
                f"both components below margin {margin:.3e} at r={r_zero:.6g}; "
                "tighten rel_tol/abs_tol")
        record(r_zero, y_zero)
        traj = build_trajectory(r_zero)
        return ShotOutcome(kind, xi, eta, traj, zero_radius=float(r_zero),
                           other_value=other)

    while True:
        if solver.status == "finished":
            break
        if steps >= config.max_steps:
            raise MaxStepsExceeded(
                f"shot (xi={xi:g}, eta={eta:g}) exceeded {config.max_steps} steps")
        solver.step()
        steps += 1
        if solver.status == "failed":
            raise StepSizeUnderflow(
                f"step size underflow at r={solver.t:.6g} for (xi={xi:g}, eta={eta:g})")
        dense = solver.dense_output()
        if mode == "flux":
            flux_ts.append(solver.t)
            flux_interp.append(dense)
        else:
            deriv_ts.append(solver.t)
            deriv_interp.append(dense)
        y = solver.y
        if y[0] <= margin or y[1] <= margin:
            out = finish_zero(dense, solver.t_old, solver.t, y)
            if out is not None:
                return out
        record(solver.t, y)
        if y[0] <= extinct_u and y[1] <= extinct_v:
            # both components numerically extinct: treat as reaching the horizon
            break
        if mode == "flux" and solver.status == "running" \
                and profile.log_weight(solver.t) >= log_switch:
            switch_radius = solver.t
            w = math.exp(profile.log_weight(solver.t))
            y_deriv = np.array([y[0], y[1], y[2] / w, y[3] / w])
            deriv_rhs = _DerivRhs(profile.lam, p, q)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")   # LSODA chatters about t_bound
                solver = LSODA(deriv_rhs, solver.t, y_deriv, horizon,
                               rtol=deep_rtol, atol=config.abs_tol,
                               jac=deriv_rhs.jac)
            mode = "deriv"
            deriv_ts.append(solver.t)

    end = rs[-1]
    traj = build_trajectory(end)
    outcome = ShotOutcome(OutcomeKind.POSITIVE_TO_HORIZON, xi, eta, traj,
                          horizon=end)
    from .diagnostics import limit_enclosure   # deferred: diagnostics imports us
    outcome.enclosure_u, outcome.enclosure_v = limit_enclosure(
        outcome, geom, exps, xi, eta)
    return outcome


# ----------------------------------------------------------------------
# guaranteed bracket seeds for the first-zero sets
# ----------------------------------------------------------------------

def membership_threshold(geom: GeometricSummary, exps: ExponentPair,
                         s: float) -> float:
    """Threshold t*(s) of the explicit membership lemma.

    t > t*(s) puts (s, 2t) in set A. On complete profiles
    t*(s) = s^((p+1)/(q+1)); on incomplete profiles with total ratio mass
    theta, t*(s) = max(theta s^p, (s/theta)^(1/q)).
    """
    p, q = exps.p, exps.q
    if geom.completeness is Completeness.COMPLETE:
        return s ** ((p + 1.0) / (q + 1.0))
    th = geom.theta_total
    return max(th * s ** p, (s / th) ** (1.0 / q))


def ab_seed_brackets(geom: GeometricSummary, exps: ExponentPair, xi: float,
                     config: IntegratorConfig = DEFAULT_CONFIG,
                     safety: float = 2.0,
                     confirm: bool = True) -> tuple[float, float]:
    """(eta_low, eta_high) with eta_low in B and eta_high in A, guaranteed.

    The A seed applies the membership lemma at s = xi: with t = safety * t*(xi),
    eta_high = 2t. The B seed applies the swapped lemma at s = xi/2 (so the
    lemma's first coordinate 2s matches xi), deflating the swapped threshold
    by the safety factor. Each seed is confirmed by one shot unless
    ``confirm=False``.
    """
    if xi <= 0:
        raise ValueError("xi must be positive")
    eta_high = 2.0 * safety * membership_threshold(geom, exps, xi)
    swapped = exps.swapped()
    eta_low = _b_threshold(geom, swapped, xi / 2.0) / safety
    if confirm:
        hi_shot = integrate_shot(geom, exps, xi, eta_high, config)
        if not hi_shot.in_a:
            raise BracketConfirmationFailed(
                f"seed eta={eta_high:g} expected in A, classified {hi_shot.kind.value}"
                " (horizon too short or tolerance too loose)")
        lo_shot = integrate_shot(geom, exps, xi, eta_low, config)
        if not lo_shot.in_b:
            raise BracketConfirmationFailed(
                f"seed eta={eta_low:g} expected in B, classified {lo_shot.kind.value}")
    return eta_low, eta_high


def _b_threshold(geom: GeometricSummary, swapped: ExponentPair, s: float) -> float:
    """Largest t with (2s, t) guaranteed in B, before safety deflation.

    Mirrors ``membership_threshold`` through the (u, p, xi) <-> (v, q, eta)
    swap: (2s, t) lies in B when s exceeds the swapped threshold at t, i.e.
    when t is below the inverse map evaluated at s.
    """
    p, q = swapped.q, swapped.p   # original pair
    if geom.completeness is Completeness.COMPLETE:
        return s ** ((p + 1.0) / (q + 1.0))
    th = geom.theta_total
    # need theta t^q < s and (t/theta)^(1/p) < s simultaneously
    return min((s / th) ** (1.0 / q), th * s ** p)
