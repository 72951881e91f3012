"""Integral identities and compactness thresholds.

Three families of exact relations are exposed here, each with a quadrature
route and (where one exists) a closed-form route so the two can be played
off against each other:

* a one-step recurrence between moments of the bubble profile, valid for
  2 <= beta <= 2(N-s) - 1:

      int r^(beta-s) W dr = (beta-1)/(2N - beta - 1 - s) * int r^(beta-2) W dr,

  with W = (1 + r^(2-s))^(-2(N-s)/(2-s));

* the vanishing-concentration limit of the boundary sliver mass/energy
  ratio, (N-3)/((N+1-s)(N-2)^2), together with the bubble moment ratio
  (N-s) * weighted_mass / ((N-2) * grad_energy) = (N-2)^(-2) and the
  strictly positive gap between the two;

* per-site energy levels below which minimising sequences stay compact:
  (2-s)/(2(N-s)) * S^((N-s)/(2-s)) at an interior singularity and half of
  that at a boundary singularity (S the best constant for that site's s),
  the overall threshold being the minimum over sites; and, from it, the
  largest coefficient for which the constant test path stays below the
  threshold.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .extremals import HSParams, whole_space_constants
from .quadrature import QuadratureSettings, RadialPowerIntegrand, integrate_radial_power

__all__ = [
    "EmptySiteList",
    "MixedExponents",
    "MomentRatio",
    "OutOfRangeBeta",
    "Placement",
    "RecurrenceCheck",
    "SingularitySite",
    "ThresholdReport",
    "beta_recurrence_check",
    "bubble_moment_ratio",
    "constant_path_max",
    "lambda_existence_bound",
    "lambda_existence_bound_numeric",
    "ps_threshold",
    "sliver_ratio_limit",
    "strict_gap",
]


class OutOfRangeBeta(ValueError):
    """beta outside [2, 2(N-s)-1], where the moment recurrence holds."""


class EmptySiteList(ValueError):
    """Thresholds need at least one singularity site."""


class MixedExponents(ValueError):
    """Closed-form inversion needs every site to share one exponent s."""


class Placement(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class SingularitySite:
    """A singularity's placement (interior/boundary) and its exponent s."""

    placement: Placement
    s: float

    def __post_init__(self) -> None:
        if not isinstance(self.placement, Placement):
            raise ValueError("placement must be a Placement member")
        if not (0.0 < self.s < 2.0):
            raise ValueError("s must lie in (0, 2)")


@dataclass(frozen=True)
class ThresholdReport:
    """Per-site compactness levels and their minimum."""

    per_site: tuple[tuple[SingularitySite, float], ...]
    overall: float


class RecurrenceCheck(NamedTuple):
    lhs: float
    rhs: float
    rel_diff: float


class MomentRatio(NamedTuple):
    closed: float
    quadrature: float


def beta_recurrence_check(
    beta: float, p: HSParams, cfg: QuadratureSettings | None = None
) -> RecurrenceCheck:
    """Evaluate both sides of the bubble moment recurrence at a given beta.

    lhs = int r^(beta-s) W dr and
    rhs = (beta-1)/(2N-beta-1-s) * int r^(beta-2) W dr, both by quadrature.
    """
    n, s = p.N, p.s
    hi = 2.0 * (n - s) - 1.0
    if not (2.0 <= beta <= hi + 1e-12):
        raise OutOfRangeBeta(f"beta={beta} outside [2, {hi}]")
    cfg = cfg or QuadratureSettings()
    b = 2.0 * (n - s) / (2.0 - s)
    lhs = integrate_radial_power(RadialPowerIntegrand(beta - s, b, s), cfg)
    base = integrate_radial_power(RadialPowerIntegrand(beta - 2.0, b, s), cfg)
    rhs = (beta - 1.0) / (2.0 * n - beta - 1.0 - s) * base
    rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs))
    return RecurrenceCheck(lhs=lhs, rhs=rhs, rel_diff=rel)


def sliver_ratio_limit(p: HSParams) -> float:
    """Vanishing-eps limit of the sliver mass over sliver energy ratio.

    Equals (N-3)/((N+1-s)(N-2)^2); zero in dimension three, where the
    energy sliver carries an extra logarithm instead of a clean power.
    """
    n, s = p.N, p.s
    return (n - 3.0) / ((n + 1.0 - s) * (n - 2.0) ** 2)


def bubble_moment_ratio(p: HSParams, cfg: QuadratureSettings | None = None) -> MomentRatio:
    """(N-s) * weighted_mass / ((N-2) * grad_energy).

    Closed form (N-2)^(-2) (a beta = N+1-s instance of the moment
    recurrence), returned alongside the quadrature value.
    """
    n = p.N
    consts = whole_space_constants(p, cfg)
    quad = (n - p.s) * consts.weighted_mass / ((n - 2.0) * consts.grad_energy)
    return MomentRatio(closed=(n - 2.0) ** (-2.0), quadrature=quad)


def strict_gap(p: HSParams) -> float:
    """(N-2)^(-2) - sliver_ratio_limit; strictly positive for admissible (N, s)."""
    return (p.N - 2.0) ** (-2.0) - sliver_ratio_limit(p)


def _threshold_level(n: int, site: SingularitySite, cfg: QuadratureSettings | None) -> float:
    p = HSParams(n, site.s)
    best = whole_space_constants(p, cfg).best_constant
    power = (n - site.s) / (2.0 - site.s)  # = q/(q-2) for the critical q
    level = (2.0 - site.s) / (2.0 * (n - site.s)) * best**power
    if site.placement is Placement.BOUNDARY:
        level *= 0.5
    return level


def ps_threshold(
    n: int, sites: Sequence[SingularitySite], cfg: QuadratureSettings | None = None
) -> ThresholdReport:
    """Palais-Smale compactness threshold for a configuration of sites.

    Interior level (2-s)/(2(N-s)) * S^((N-s)/(2-s)); boundary level half of
    that (concentration can only use half a neighbourhood there).  The
    overall threshold is the minimum over sites, hence non-increasing as
    sites are appended.
    """
    if not isinstance(n, int) or n < 3:
        raise ValueError("dimension must be an integer >= 3")
    sites = tuple(sites)
    if not sites:
        raise EmptySiteList("at least one singularity site is required")
    per = tuple((site, _threshold_level(n, site, cfg)) for site in sites)
    return ThresholdReport(per_site=per, overall=min(level for _, level in per))


def constant_path_max(lam: float, volume: float, c1: float, q: float) -> tuple[float, float]:
    """Maximiser and maximum of c -> lam*volume*c^2/2 - c1*c^q/q over c > 0.

    The maximiser is c* = (lam*volume/c1)^(1/(q-2)) and the maximum value
    is (1/2 - 1/q)*lam*volume*c*^2.  Requires lam, volume, c1 > 0, q > 2.
    """
    if min(lam, volume, c1) <= 0.0 or q <= 2.0:
        raise ValueError("need lam, volume, c1 > 0 and q > 2")
    c_star = (lam * volume / c1) ** (1.0 / (q - 2.0))
    value = (0.5 - 1.0 / q) * lam * volume * c_star**2
    return c_star, value


def lambda_existence_bound(
    volume: float,
    c1: float,
    sites: Sequence[SingularitySite],
    p: HSParams,
    cfg: QuadratureSettings | None = None,
) -> float:
    """Largest lam with the constant-path peak below the overall threshold.

    Solves (1/2 - 1/q)*lam*volume*(lam*volume/c1)^(2/(q-2)) = threshold in
    closed form (q the shared critical exponent, c1 the total singular
    weight mass over the domain).  Below the returned value the constant
    test path peaks strictly under every per-site compactness level; no
    sharpness is claimed at or above it.  Doubling c1 multiplies the bound
    by 2^(2/q).
    """
    sites = tuple(sites)
    if not sites:
        raise EmptySiteList("at least one singularity site is required")
    if any(abs(site.s - p.s) > 1e-12 for site in sites):
        raise MixedExponents(
            "sites disagree on s; use lambda_existence_bound_numeric for mixed exponents"
        )
    if volume <= 0.0 or c1 <= 0.0:
        raise ValueError("volume and c1 must be positive")
    q = p.two_star
    theta = ps_threshold(p.N, sites, cfg).overall
    # peak value = kappa * lam^(q/(q-2)) with kappa as below
    kappa = (0.5 - 1.0 / q) * volume ** (q / (q - 2.0)) * c1 ** (-2.0 / (q - 2.0))
    return (theta / kappa) ** ((q - 2.0) / q)


def lambda_existence_bound_numeric(
    volume: float,
    terms: Sequence[tuple[float, float]],
    threshold: float,
    *,
    lo: float = 1e-8,
    hi: float = 1e8,
    rel_tol: float = 1e-10,
) -> float:
    """Bisection fallback for mixed exponents.

    ``terms`` lists (c_i, q_i) pairs of the constant-path energy
    c -> lam*volume*c^2/2 - sum_i c_i*c^(q_i)/q_i.  The peak over c comes
    from the stationarity equation (whose right side is strictly
    increasing in c), and lam is bisected geometrically until the peak
    meets ``threshold``.
    """
    terms = [(float(c), float(q)) for c, q in terms]
    if volume <= 0 or threshold <= 0 or not terms:
        raise ValueError("need positive volume/threshold and at least one term")
    if any(c <= 0 or q <= 2 for c, q in terms):
        raise ValueError("every term needs c_i > 0 and q_i > 2")

    def peak(lam: float) -> float:
        # solve lam*volume = sum c_i c^(q_i-2) for the unique c > 0
        target = lam * volume
        c_hi = 1.0
        while sum(c * c_hi ** (q - 2.0) for c, q in terms) < target:
            c_hi *= 2.0
        c_lo = c_hi / 2.0
        while sum(c * c_lo ** (q - 2.0) for c, q in terms) > target:
            c_lo /= 2.0
        for _ in range(200):
            mid = 0.5 * (c_lo + c_hi)
            if sum(c * mid ** (q - 2.0) for c, q in terms) < target:
                c_lo = mid
            else:
                c_hi = mid
            if c_hi - c_lo <= 1e-14 * c_hi:
                break
        c_star = 0.5 * (c_lo + c_hi)
        return 0.5 * lam * volume * c_star**2 - sum(c * c_star**q / q for c, q in terms)

    if peak(lo) > threshold or peak(hi) < threshold:
        raise ValueError("threshold not bracketed on [lo, hi]")
    while hi - lo > rel_tol * hi:
        mid = math.sqrt(lo * hi)  # geometric bisection across the bracket
        if peak(mid) < threshold:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
