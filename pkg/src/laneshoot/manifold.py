"""Rotationally symmetric model-manifold geometry.

A model manifold about a pole is the half line [0, inf) carrying the metric
``dr^2 + psi(r)^2 g_sphere`` for a warping function ``psi`` with

    psi(0) = 0,   psi'(0) = 1,   psi(r) > 0 for r > 0.

Everything the radial shooting problem needs from the geometry reduces to
scalar quadratures of powers of ``psi``:

    W(r)      = psi(r)^(n-1)                 surface weight of the sphere
    V(r)      = int_0^r W ds                 ball volume (per solid angle)
    Theta(r)  = V(r) / W(r)                  volume-surface ratio
    theta     = int_0^inf Theta dr           finite iff stochastically
                                             incomplete

All internal evaluations go through ``log psi`` so that profiles with
super-exponential volume growth stay representable far beyond the point where
``psi`` itself overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import AmbiguousCompleteness, ProfileError
from .quadrature import adaptive_quad, cumulative_gauss

# Below this radius Theta is evaluated by its series r/n instead of a 0/0
# quadrature ratio.
SMALL_RADIUS = 1e-4

# Diagnostic quantities carry factors up to W(r)^2-ish; keeping
# (n-1) log psi below this keeps them inside double range.
_LOG_WEIGHT_CAP = 400.0

# Default tail mass left beyond the horizon on incomplete profiles.
_INCOMPLETE_TAIL_TARGET = 0.02

_DEFAULT_COMPLETE_HORIZON = 1e3


class Completeness(Enum):
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"


class Confidence(Enum):
    DECLARED = "declared"
    INFERRED = "numerically_inferred"


@dataclass(frozen=True)
class ProfileSpec:
    """Serializable constructor arguments of a builtin profile."""

    family: str
    n: int
    params: tuple[tuple[str, float], ...] = ()

    def as_dict(self) -> dict:
        return {"family": self.family, "n": self.n, **dict(self.params)}


@dataclass(frozen=True)
class ManifoldProfile:
    """Warping function with analytic derivatives and dimension.

    ``psi_prime`` and ``psi_second`` must be supplied analytically: the
    Pohozaev kernel and the convexity certificate are sensitive to
    ``psi''`` and numerical differentiation would amplify noise.

    ``psi_log`` is optional; when given it must equal ``log(psi)`` and is
    used to evaluate surface weights without overflow.
    """

    name: str
    n: int
    psi: Callable
    psi_prime: Callable
    psi_second: Callable
    completeness_hint: Optional[Completeness] = None
    psi_log: Optional[Callable] = None
    psi_log_prime: Optional[Callable] = None   # psi'/psi, overflow-safe
    spec: Optional[ProfileSpec] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ProfileError(f"dimension must be an integer >= 3, got {self.n}")
        # pole conditions: psi(r)/r -> 1 from below the series scale
        for r in (1e-7, 1e-8):
            ratio = float(self.psi(r)) / r
            if not math.isfinite(ratio) or abs(ratio - 1.0) > 1e-3:
                raise ProfileError(
                    f"profile '{self.name}': psi(r)/r = {ratio} at r={r}; "
                    "need psi(0)=0 and psi'(0)=1")
        for r in (1e-6, 1e-2, 0.5, 1.0, 2.0, 5.0):
            if not float(self.psi(r)) > 0.0:
                raise ProfileError(f"profile '{self.name}': psi({r}) <= 0")

    def log_psi(self, r):
        if self.psi_log is not None:
            return self.psi_log(r)
        return np.log(self.psi(r))

    def log_weight(self, r):
        """(n-1) log psi(r)."""
        return (self.n - 1) * self.log_psi(r)

    def weight(self, r):
        """Surface weight psi^(n-1)."""
        return np.exp(self.log_weight(r))

    def lam(self, r):
        """Radial drift coefficient (n-1) psi'/psi of the Laplacian."""
        if self.psi_log_prime is not None:
            return (self.n - 1) * self.psi_log_prime(r)
        return (self.n - 1) * self.psi_prime(r) / self.psi(r)


# ----------------------------------------------------------------------
# builtin warping-function families (top-level classes so profiles pickle)
# ----------------------------------------------------------------------

class _EuclideanWarp:
    def psi(self, r):
        return np.asarray(r, dtype=float) + 0.0

    def psi_prime(self, r):
        return np.ones_like(np.asarray(r, dtype=float))

    def psi_second(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def psi_log(self, r):
        return np.log(r)

    def psi_log_prime(self, r):
        return 1.0 / np.asarray(r, dtype=float)


class _HyperbolicWarp:
    """psi(r) = sinh(a r)/a, constant sectional curvature -a^2."""

    def __init__(self, a: float):
        self.a = float(a)

    def psi(self, r):
        return np.sinh(self.a * np.asarray(r, dtype=float)) / self.a

    def psi_prime(self, r):
        return np.cosh(self.a * np.asarray(r, dtype=float))

    def psi_second(self, r):
        return self.a * np.sinh(self.a * np.asarray(r, dtype=float))

    def psi_log(self, r):
        # log sinh(x) = x + log1p(-exp(-2x)) - log 2, stable for large x
        x = self.a * np.asarray(r, dtype=float)
        small = x < 1.0
        with np.errstate(divide="ignore"):
            out = np.where(
                small,
                np.log(np.sinh(np.where(small, x, 1.0))),
                np.where(small, 0.0, x) + np.log1p(-np.exp(-2.0 * np.maximum(x, 1.0))) - math.log(2.0),
            )
        return out - math.log(self.a)

    def psi_log_prime(self, r):
        return self.a / np.tanh(self.a * np.asarray(r, dtype=float))


class _ExpPowerWarp:
    """psi(r) = r exp(r^alpha); incomplete iff alpha > 2."""

    def __init__(self, alpha: float):
        self.alpha = float(alpha)

    def psi(self, r):
        r = np.asarray(r, dtype=float)
        return r * np.exp(r ** self.alpha)

    def psi_prime(self, r):
        r = np.asarray(r, dtype=float)
        ra = r ** self.alpha
        return np.exp(ra) * (1.0 + self.alpha * ra)

    def psi_second(self, r):
        r = np.asarray(r, dtype=float)
        ra = r ** self.alpha
        return np.exp(ra) * self.alpha * r ** (self.alpha - 1.0) * (1.0 + self.alpha + self.alpha * ra)

    def psi_log(self, r):
        r = np.asarray(r, dtype=float)
        return np.log(r) + r ** self.alpha

    def psi_log_prime(self, r):
        r = np.asarray(r, dtype=float)
        return 1.0 / r + self.alpha * r ** (self.alpha - 1.0)


@lru_cache(maxsize=64)
def builtin_profile(family: str, n: int, curvature: float = 1.0,
                    alpha: float = 3.0) -> ManifoldProfile:
    """Construct one of the builtin profiles.

    family
        ``"euclidean"``        psi(r) = r (flat)
        ``"hyperbolic"``       psi(r) = sinh(curvature r)/curvature
        ``"exp_power"``        psi(r) = r exp(r^alpha)

    Euclidean and hyperbolic models, and exp_power with alpha <= 2, are
    stochastically complete; exp_power with alpha > 2 is incomplete. The
    classification ships declared because a finite-data tail heuristic cannot
    decide it; the test suite checks it against the quadrature classifier
    wherever the latter resolves.
    """
    fam = family.lower()
    if fam == "euclidean":
        w = _EuclideanWarp()
        return ManifoldProfile(
            name=f"euclidean(n={n})", n=n, psi=w.psi, psi_prime=w.psi_prime,
            psi_second=w.psi_second, psi_log=w.psi_log, psi_log_prime=w.psi_log_prime,
            completeness_hint=Completeness.COMPLETE,
            spec=ProfileSpec("euclidean", n))
    if fam == "hyperbolic":
        if curvature <= 0:
            raise ProfileError("hyperbolic curvature scale must be positive")
        w = _HyperbolicWarp(curvature)
        return ManifoldProfile(
            name=f"hyperbolic(a={curvature:g},n={n})", n=n, psi=w.psi,
            psi_prime=w.psi_prime, psi_second=w.psi_second, psi_log=w.psi_log,
            psi_log_prime=w.psi_log_prime,
            completeness_hint=Completeness.COMPLETE,
            spec=ProfileSpec("hyperbolic", n, (("curvature", float(curvature)),)))
    if fam == "exp_power":
        if alpha <= 0:
            raise ProfileError("exp_power exponent alpha must be positive")
        w = _ExpPowerWarp(alpha)
        hint = Completeness.INCOMPLETE if alpha > 2 else Completeness.COMPLETE
        return ManifoldProfile(
            name=f"exp_power(alpha={alpha:g},n={n})", n=n, psi=w.psi,
            psi_prime=w.psi_prime, psi_second=w.psi_second, psi_log=w.psi_log,
            psi_log_prime=w.psi_log_prime, completeness_hint=hint,
            spec=ProfileSpec("exp_power", n, (("alpha", float(alpha)),)))
    raise ProfileError(f"unknown profile family '{family}'")


def profile_from_spec(spec: ProfileSpec) -> ManifoldProfile:
    return builtin_profile(spec.family, spec.n, **dict(spec.params))


# ----------------------------------------------------------------------
# geometric scalars
# ----------------------------------------------------------------------

def flux_safe_radius(profile: ManifoldProfile) -> float:
    """Largest radius where psi^(n-1) and its running integrals stay
    comfortably inside double range (weight <= e^400)."""
    lo, hi = 1.0, 2.0
    if profile.log_weight(lo) > _LOG_WEIGHT_CAP:
        return lo
    while profile.log_weight(hi) < _LOG_WEIGHT_CAP:
        lo, hi = hi, hi * 2.0
        if hi > 1e9:
            return 1e9
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if profile.log_weight(mid) < _LOG_WEIGHT_CAP:
            lo = mid
        else:
            hi = mid
    return lo


@lru_cache(maxsize=256)
def ball_volume(profile: ManifoldProfile, r: float, rel_tol: float = 1e-12) -> float:
    """V(r) = int_0^r psi^(n-1) ds per unit solid angle."""
    if r <= 0:
        return 0.0
    return adaptive_quad(lambda s: profile.weight(s), 0.0, r, rel_tol=rel_tol)


def theta(profile: ManifoldProfile, r: float, rel_tol: float = 1e-10) -> float:
    """Volume-surface ratio Theta(r) = V(r)/psi^(n-1)(r).

    Near the pole psi ~ r makes the ratio 0/0; below ``SMALL_RADIUS`` the
    series value r/n is used instead.
    """
    if r <= 0:
        raise ValueError("theta requires r > 0")
    if r < SMALL_RADIUS:
        return r / profile.n
    lw = profile.log_weight(r)
    # integrate W(s)/W(r) directly so huge weights never materialize
    val = adaptive_quad(lambda s: np.exp(profile.log_weight(s) - lw),
                        0.0, r, rel_tol=rel_tol)
    return val


def _theta_vec(profile: ManifoldProfile, rs: np.ndarray) -> np.ndarray:
    return np.array([theta(profile, float(r)) for r in rs])


@lru_cache(maxsize=4096)
def tail_flux_length(profile: ManifoldProfile, h: float,
                     rel_tol: float = 1e-10) -> float:
    """g(h) = psi^(n-1)(h) int_h^inf psi^(1-n) ds.

    This length converts an inherited radial derivative at ``h`` into its
    total contribution beyond ``h``: integrating the flux equation gives
    |u(inf) - u(h)| <= |u'(h)| g(h) + (forcing terms). The integrand
    exp((n-1)(log psi(h) - log psi(s))) is <= 1, so the quadrature is
    overflow-free at any depth; it is truncated where the weight has grown
    by e^80 and steered into the boundary layer at ``h`` where the decay
    is steep.
    """
    lw = float(profile.log_weight(h))
    lam_h = float(profile.lam(h))

    if lam_h * h > 1e5:
        # the boundary layer 1/lam is too thin to sample in double precision
        # near h; the Laplace expansion (1 - lam'/lam^2)/lam is then accurate
        # to better than (lam'/lam^2)^2 ~ 1e-10
        dlam = (float(profile.lam(h * (1.0 + 1e-7))) - lam_h) / (1e-7 * h)
        return (1.0 - dlam / lam_h ** 2) / lam_h

    if lam_h * h > 50.0:
        # boundary layer of width 1/lam(h) at the left end: integrate in
        # stretched units x = lam(h)(s - h); e^-x-like decay by construction,
        # truncated before the integrand underflows
        span = 60.0
        while np.exp(lw - profile.log_weight(h + span / lam_h)) > 1e-25 and span < 1e5:
            span *= 2.0

        def stretched(x):
            return np.exp(lw - profile.log_weight(h + x / lam_h))

        return adaptive_quad(stretched, 0.0, span, rel_tol=rel_tol) / lam_h

    def integrand(s):
        return np.exp(lw - profile.log_weight(s))

    lo, hi = h, 2.0 * h
    while profile.log_weight(hi) < lw + 80.0 and hi < 1e30:
        lo, hi = hi, 2.0 * hi
    return adaptive_quad(integrand, h, hi, rel_tol=rel_tol)


@lru_cache(maxsize=256)
def tail_theta_rebased(profile: ManifoldProfile, h: float,
                       rel_tol: float = 1e-9) -> float:
    """T(h) = int_h^inf (1/W(s)) int_h^s W dt ds = int_h^inf g(t) dt.

    The rebased tail ratio: same as ``tail_theta`` but with the ball volume
    counted from ``h`` instead of the pole. This is the coefficient that
    multiplies a sup bound of the forcing on (h, inf) in the limit
    enclosures.
    """
    return adaptive_quad(lambda t: tail_flux_length(profile, float(t)),
                         h, np.inf, rel_tol=rel_tol)


@lru_cache(maxsize=256)
def tail_theta(profile: ManifoldProfile, h: float) -> float:
    """int_h^inf Theta ds, finite only on incomplete profiles.

    Split as Theta(h) g(h) + T(h): the volume below ``h`` attenuates with
    the flux length, the rest is the rebased tail.
    """
    return theta(profile, h) * tail_flux_length(profile, h) \
        + tail_theta_rebased(profile, h)


def _tail_decay_slope(profile: ManifoldProfile, r_hi: float) -> float:
    """log-log slope of Theta over the trailing octave below ``r_hi``."""
    rs = np.geomspace(r_hi / 2.0, r_hi, 5)
    th = _theta_vec(profile, rs)
    if np.any(th <= 0):
        raise ProfileError("Theta must stay positive")
    return float(np.polyfit(np.log(rs), np.log(th), 1)[0])


def classify_completeness(profile: ManifoldProfile) -> Completeness:
    """Tail-extrapolation heuristic for Theta integrability.

    Integrability is undecidable from finite data; the heuristic fits the
    decay exponent of Theta near the largest representable radius and leaves
    a dead zone around the critical exponent -1, raising
    :class:`AmbiguousCompleteness` inside it.
    """
    r_hi = min(flux_safe_radius(profile), 1e4)
    slope = _tail_decay_slope(profile, r_hi)
    if slope > -1.05:
        return Completeness.COMPLETE
    if slope < -1.25:
        return Completeness.INCOMPLETE
    raise AmbiguousCompleteness(
        f"Theta decay exponent {slope:.3f} too close to -1 at r={r_hi:g}; "
        "supply completeness_hint")


def resolve_completeness(profile: ManifoldProfile) -> tuple[Completeness, Confidence]:
    if profile.completeness_hint is not None:
        return profile.completeness_hint, Confidence.DECLARED
    return classify_completeness(profile), Confidence.INFERRED


@lru_cache(maxsize=64)
def theta_total(profile: ManifoldProfile, rel_tol: float = 1e-10) -> float:
    """theta = int_0^inf Theta dr; ``math.inf`` on complete profiles.

    On incomplete profiles the value is an honest quadrature: the head is
    integrated adaptively and the tail is the exact split
    Theta(R) g(R) + T(R), not an asymptotic extrapolation.
    """
    completeness, _ = resolve_completeness(profile)
    if completeness is Completeness.COMPLETE:
        return math.inf
    r_split = 0.75 * min(flux_safe_radius(profile), 1e4)
    head = adaptive_quad(lambda r: theta(profile, float(r)), SMALL_RADIUS, r_split,
                         rel_tol=rel_tol, limit=800)
    head += SMALL_RADIUS ** 2 / (2.0 * profile.n)   # series mass below the switch
    return head + tail_theta(profile, r_split)


# ----------------------------------------------------------------------
# convexity certificate
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ConvexityCertificate:
    convex: bool
    witness: Optional[float] = None   # first radius where convexity fails
    margin: float = 0.0               # most negative normalized value seen

    def __bool__(self):
        return self.convex


def curvature_integrand(profile: ManifoldProfile, s):
    """psi^n psi''/(psi')^2, associated as W (psi/psi') (psi''/psi') so no
    intermediate power overflows where the value itself is representable."""
    return (profile.weight(s) * (profile.psi(s) / profile.psi_prime(s))
            * (profile.psi_second(s) / profile.psi_prime(s)))


def _curvature_integral_nodes(profile: ManifoldProfile, r_max: float,
                              num: int) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative int_0^r psi^n psi''/(psi')^2 ds on a log grid."""
    rs = np.geomspace(1e-3, r_max, num)
    f = lambda s: curvature_integrand(profile, s)
    head = adaptive_quad(f, 0.0, rs[0], rel_tol=1e-9, abs_floor=1e-14)
    return rs, cumulative_gauss(f, rs, initial=head)


def check_volume_convexity(profile: ManifoldProfile, exps,
                           r_max: Optional[float] = None,
                           num: int = 192, tol: float = 1e-9) -> ConvexityCertificate:
    """Certify convexity of the volume power V(r)^e, e = (pq-1)/(2(p+1)(q+1)).

    For critical exponents e equals 1/n and convexity is equivalent to the
    cumulative curvature integral int_0^r psi^n psi''/(psi')^2 ds staying
    nonnegative, which is what gets checked on a grid. For supercritical
    exponents the integral condition is only sufficient; if it fails
    somewhere, convexity is decided directly by second differences of
    V(r)^e.
    """
    p, q = exps.p, exps.q
    if p * q <= 1.0:
        raise ValueError("convexity certificate requires pq > 1")
    if r_max is None:
        r_max = min(flux_safe_radius(profile), 50.0)

    rs, cum = _curvature_integral_nodes(profile, r_max, num)
    scale = 1.0 + np.maximum.accumulate(np.abs(cum))
    bad = cum < -tol * scale
    if not bad.any():
        return ConvexityCertificate(True, margin=float(np.min(cum / scale)))

    first_bad = float(rs[int(np.argmax(bad))])
    margin = float(np.min(cum / scale))
    exponent = (p * q - 1.0) / (2.0 * (p + 1.0) * (q + 1.0))
    if abs(exponent - 1.0 / profile.n) <= 1e-12:
        # critical: the integral condition is necessary as well
        return ConvexityCertificate(False, witness=first_bad, margin=margin)

    # supercritical fallback: second differences of V^e on the same grid
    vol = cumulative_gauss(lambda s: profile.weight(s), rs,
                           initial=ball_volume(profile, float(rs[0])))
    v_pow = vol ** exponent
    h_lo = rs[1:-1] - rs[:-2]
    h_hi = rs[2:] - rs[1:-1]
    d2 = 2.0 * ((v_pow[2:] - v_pow[1:-1]) / (h_hi * (h_lo + h_hi))
                - (v_pow[1:-1] - v_pow[:-2]) / (h_lo * (h_lo + h_hi)))
    d2_scale = np.abs(v_pow[1:-1]) / rs[1:-1] ** 2 + 1e-300
    rel = d2 / d2_scale
    bad2 = rel < -1e-6
    if bad2.any():
        return ConvexityCertificate(False, witness=float(rs[1:-1][int(np.argmax(bad2))]),
                                    margin=float(np.min(rel)))
    return ConvexityCertificate(True, margin=float(np.min(rel)))


# ----------------------------------------------------------------------
# summary object consumed by the shooting and solver layers
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class GeometricSummary:
    """Geometry digest of one profile, immutable and thread-safe."""

    profile: ManifoldProfile
    completeness: Completeness
    confidence: Confidence
    theta_total: float                       # math.inf on complete profiles
    volume_convexity: Optional[ConvexityCertificate]
    flux_safe_radius: float
    default_horizon: float
    theta_of: Callable = field(repr=False, default=None)

    @property
    def incomplete(self) -> bool:
        return self.completeness is Completeness.INCOMPLETE

    def tail_theta(self, h: float) -> float:
        if not self.incomplete:
            return math.inf
        return tail_theta(self.profile, h)

    def tail_flux_length(self, h: float) -> float:
        return tail_flux_length(self.profile, h)

    def tail_theta_rebased(self, h: float) -> float:
        if not self.incomplete:
            return math.inf
        return tail_theta_rebased(self.profile, h)


def _default_horizon(profile: ManifoldProfile, completeness: Completeness) -> float:
    if completeness is Completeness.COMPLETE:
        return _DEFAULT_COMPLETE_HORIZON
    # deep enough that the uncertified tail mass is small, found by bisection
    lo, hi = 0.5, 1.0
    while tail_theta(profile, hi) > _INCOMPLETE_TAIL_TARGET:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            return 1e6
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if tail_theta(profile, mid) > _INCOMPLETE_TAIL_TARGET:
            lo = mid
        else:
            hi = mid
    return hi


@lru_cache(maxsize=64)
def summarize(profile: ManifoldProfile, exps=None) -> GeometricSummary:
    """Build the :class:`GeometricSummary` for a profile.

    The convexity certificate needs the exponent pair and is omitted when
    ``exps`` is None.
    """
    completeness, confidence = resolve_completeness(profile)
    total = theta_total(profile)
    if completeness is Completeness.INCOMPLETE and not math.isfinite(total):
        raise AmbiguousCompleteness(
            f"profile {profile.name}: declared incomplete but theta diverged")
    cert = check_volume_convexity(profile, exps) if exps is not None else None
    return GeometricSummary(
        profile=profile,
        completeness=completeness,
        confidence=confidence,
        theta_total=total,
        volume_convexity=cert,
        flux_safe_radius=flux_safe_radius(profile),
        default_horizon=_default_horizon(profile, completeness),
        theta_of=lambda r: theta(profile, r),
    )
