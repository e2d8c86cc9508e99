"""Numerical shooting laboratory for the radial Lane-Emden system on
rotationally symmetric model manifolds."""

from .manifold import (Completeness, Confidence, ConvexityCertificate,
                       GeometricSummary, ManifoldProfile, ProfileSpec,
                       builtin_profile, check_volume_convexity,
                       classify_completeness, profile_from_spec, summarize,
                       tail_theta, theta, theta_total)
from .shooting import (DEFAULT_CONFIG, SWEEP_CONFIG, ExponentPair,
                       IntegratorConfig, OutcomeKind, Regime, ShotOutcome,
                       ShotState, Trajectory, ab_seed_brackets,
                       critical_partner, integrate_shot, make_exponents,
                       origin_series)
from .diagnostics import (BoundCheck, EnergyLedger, LimitEnclosure,
                          PohozaevSample, PohozaevScan, abs_bound_check,
                          divergence_verdict, energy_ledger, flux_residual,
                          limit_enclosure, limit_upper_bounds, pohozaev_scan)
from .solver import (BandPoint, CurvePoint, RegionMap, curve_trace,
                     feasibility_interval, find_band, find_eta,
                     fit_power_law, refine_boundaries, sweep_region)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
