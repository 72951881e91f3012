"""Energy ledger of a cutoff bubble concentrating at a curved boundary point.

The model domain is the region above a quadratic graph: near the origin the
boundary is x_N = g(x') = (1/2) * sum_i alpha_i * x_i'**2 exactly (alpha the
principal curvatures), and the test field is eta * U_eps, a radial bubble
profile under a C^2 radial cutoff eta (1 on the ball of radius delta, 0
outside radius 2*delta).  Everything is evaluated in concentration
coordinates y = x / tau with tau = eps**(1/(2-s)), where the domain floor
becomes y_N = tau * g(y') and each energy piece reduces to

    (half-space radial integral on [0, 2*delta/tau])
  - (sliver integral between y_N = 0 and y_N = tau * g(y')).

Sliver integrals are computed as an exact tensor Gauss-Legendre pass over
the box |y'_i| <= 10 blended smoothly (on 8 <= |y'| <= 10) into a radial
tail that replaces the anisotropic floor by its exact spherical average
(g averaged over directions is (H / (2(N-1))) * |y'|**2, H the mean
curvature); the tail's inner integral saturates instead of being
linearised, which keeps it integrable in every dimension, including the
logarithmically divergent linearisation in dimension three.

Scaling prefactors: the gradient energy and the critical mass at the
concentration site are scale-free, the plain L2 mass carries tau**2, and
the mass at a far singularity with exponent s_i carries tau**s_i together
with the distance proxy delta**(-s_i) (valid because the cutoff support
stays at least delta away from any site admitted at distance >= 3*delta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .extremals import HSParams
from .identities import Placement, SingularitySite, ps_threshold
from .quadrature import (
    QuadratureSettings,
    RadialPowerIntegrand,
    adaptive_gauss_kronrod,
    integrate_improper,
    integrate_radial_power,
    sphere_surface_area,
)
from .quadrature import _build_rule  # shared panel rule

__all__ = [
    "BoundaryGeometry",
    "CutoffSpec",
    "DegenerateDenominator",
    "EnergyBreakdown",
    "EpsTooLarge",
    "MarginReport",
    "MarginRow",
    "RayPeak",
    "bubble_energies",
    "fit_log_slope",
    "fit_power_log_basis",
    "ray_peak_energy",
    "sliver_energy_integral",
    "sliver_energy_leading_coefficient",
    "sliver_mass_integral",
    "sliver_mass_leading_coefficient",
    "threshold_inequality_check",
]


class EpsTooLarge(ValueError):
    """Concentration scale too coarse for the cutoff patch (tau > delta/10)."""


class DegenerateDenominator(ValueError):
    """The ray energy has no positive mass term to balance the quadratic."""


# ---------------------------------------------------------------------------
# geometry, cutoff, result records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryGeometry:
    """Quadratic boundary model: floor x_N = (1/2) * sum alpha_i x_i**2.

    ``curvatures`` are the principal curvatures (one per tangential axis,
    so their count must equal N-1 for the dimension in use) and ``delta``
    is the patch radius the cutoff lives on.  The mean curvature is always
    recomputed as the plain sum of the entries.
    """

    curvatures: tuple[float, ...]
    delta: float

    def __post_init__(self) -> None:
        curv = tuple(float(a) for a in self.curvatures)
        object.__setattr__(self, "curvatures", curv)
        if not curv:
            raise ValueError("curvatures must be a nonempty tuple")
        if not all(math.isfinite(a) for a in curv):
            raise ValueError("curvatures must be finite")
        if not (math.isfinite(self.delta) and self.delta > 0.0):
            raise ValueError("delta must be a positive real")

    @property
    def mean_curvature(self) -> float:
        return float(sum(self.curvatures))


def _smooth_fall(t: np.ndarray) -> np.ndarray:
    """C^2 descent from 1 at t=0 to 0 at t=1: 1 - t**3 (10 - 15 t + 6 t**2)."""
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def _smooth_fall_slope(t: np.ndarray) -> np.ndarray:
    return -30.0 * t * t * (1.0 - t) ** 2


@dataclass(frozen=True)
class CutoffSpec:
    """Radial C^2 cutoff: 1 on [0, delta], polynomial descent, 0 beyond 2*delta."""

    delta: float
    profile: str = "smoothstep3"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta) and self.delta > 0.0):
            raise ValueError("delta must be a positive real")
        if self.profile != "smoothstep3":
            raise ValueError(f"unknown cutoff profile {self.profile!r}")

    def value(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        t = np.clip(r / self.delta - 1.0, 0.0, 1.0)
        return _smooth_fall(t)

    def slope(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        t = (r - self.delta) / self.delta
        inside = (t > 0.0) & (t < 1.0)
        return np.where(inside, _smooth_fall_slope(np.clip(t, 0.0, 1.0)) / self.delta, 0.0)


@dataclass(frozen=True)
class EnergyBreakdown:
    """All energy pieces of the cutoff bubble on the curved model domain.

    grad_energy   gradient energy of the cutoff bubble (scale-free piece;
                  tends to half the whole-space gradient energy).
    near_mass     critical mass at the concentration site, weight |x|**(-s)
                  (tends to half the whole-space weighted mass).
    far_masses    per far-site critical masses under the distance proxy
                  delta**(-s_i); they scale like eps**(s_i/(2-s)).
    l2_mass       plain squared mass, scaling like tau**2 times a radial
                  integral that may itself grow as the cutoff widens.
    sliver_energy, sliver_mass
                  the curvature corrections actually subtracted from
                  grad_energy and near_mass: integrals of the cutoff
                  integrands over the region between the flat floor and the
                  quadratic floor (both vanish identically for a flat patch).
    """

    eps: float
    grad_energy: float
    near_mass: float
    far_masses: tuple[float, ...]
    l2_mass: float
    sliver_energy: float
    sliver_mass: float

    def __post_init__(self) -> None:
        vals = [self.eps, self.grad_energy, self.near_mass, self.l2_mass,
                self.sliver_energy, self.sliver_mass, *self.far_masses]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("all energy entries must be finite")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")


class RayPeak(NamedTuple):
    scale: float
    value: float


class MarginRow(NamedTuple):
    eps: float
    peak: float
    margin: float
    scaled_margin: float


@dataclass(frozen=True)
class MarginReport:
    """Peak-versus-threshold audit along a list of concentration scales.

    ``rows`` are sorted by descending eps.  ``margin`` is threshold - peak
    (positive means the ray maximum sits strictly below the compactness
    threshold); it shrinks like eps**(1/(2-s)), so ``scaled_margin`` divides
    it by that concentration scale.  ``strict_margin`` says every listed
    margin is positive; ``scaled_margin_increasing`` says the scaled margins
    strictly increase as eps decreases (the coherent monotone statement --
    the absolute margin tends to zero by design).
    """

    threshold: float
    rows: tuple[MarginRow, ...]
    strict_margin: bool
    scaled_margin_increasing: bool


# ---------------------------------------------------------------------------
# radial profile densities (in concentration coordinates)
# ---------------------------------------------------------------------------


def _profile_pack(p: HSParams, tau: float, cut: CutoffSpec | None):
    """Radial densities of the (optionally cutoff) bubble in scaled coordinates.

    Returns callables of t = |y|:
      grad(t) : |d/dt (eta~ * U1)|**2         (squared radial derivative)
      mass(t) : (eta~ * U1)**q * t**(-s)      with q the critical exponent
      l2(t)   : (eta~ * U1)**2
      powq(q') : t -> (eta~ * U1)**q'         for arbitrary exponent q'
    where U1(t) = (1 + t**(2-s))**kappa, kappa = (2-N)/(2-s), and
    eta~(t) = eta(tau * t) is the cutoff seen at scale tau (eta~ == 1 when
    ``cut`` is None, giving the pure whole-profile densities).
    """
    n, s = p.N, p.s
    kappa = (2.0 - n) / (2.0 - s)
    b = 2.0 * (n - s) / (2.0 - s)
    q = p.two_star

    def u1(t):
        return (1.0 + t ** (2.0 - s)) ** kappa

    def du1(t):
        return (2.0 - n) * t ** (1.0 - s) * (1.0 + t ** (2.0 - s)) ** (kappa - 1.0)

    if cut is None:
        def grad(t):
            return (n - 2.0) ** 2 * t ** (2.0 - 2.0 * s) * (1.0 + t ** (2.0 - s)) ** (-b)

        def mass(t):
            return t ** (-s) * (1.0 + t ** (2.0 - s)) ** (-b)

        def l2(t):
            return (1.0 + t ** (2.0 - s)) ** (2.0 * kappa)

        def powq(qi: float):
            return lambda t: (1.0 + t ** (2.0 - s)) ** (kappa * qi)
    else:
        def eta(t):
            return cut.value(tau * t)

        def deta(t):
            return tau * cut.slope(tau * t)

        def grad(t):
            return (deta(t) * u1(t) + eta(t) * du1(t)) ** 2

        def mass(t):
            return eta(t) ** q * t ** (-s) * (1.0 + t ** (2.0 - s)) ** (-b)

        def l2(t):
            return (eta(t) * u1(t)) ** 2

        def powq(qi: float):
            return lambda t: eta(t) ** qi * (1.0 + t ** (2.0 - s)) ** (kappa * qi)

    return grad, mass, l2, powq


# ---------------------------------------------------------------------------
# shared quadrature plumbing
# ---------------------------------------------------------------------------

_GK_NODES, _GK_WK, _ = _build_rule()
_W_EDGES = np.concatenate([[0.0], 2.0 ** np.arange(-6.0, 8.0)])  # 0, 1/64 .. 128
_BOX_HALF_WIDTH = 10.0
_BLEND_LO = 8.0
_BLEND_HI = 10.0
_DEFAULT_BOX_NODES = {2: 96, 3: 56, 4: 28}


def _geometric_seeds(lo: float, hi: float) -> list[float]:
    """Powers of two strictly inside (lo, hi), as initial panel edges."""
    out = []
    k = -6
    while 2.0**k <= lo:
        k += 1
    while 2.0**k < hi and k <= 64:
        out.append(2.0**k)
        k += 1
    return out


@lru_cache(maxsize=8)
def _gl_nodes(count: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights transplanted to [0, _BOX_HALF_WIDTH]."""
    x, w = np.polynomial.legendre.leggauss(count)
    half = 0.5 * _BOX_HALF_WIDTH
    return half * (x + 1.0), half * w


def _blend(rho: np.ndarray) -> np.ndarray:
    """1 out to the blend window, C^2 descent to 0 across [8, 10]."""
    t = np.clip((rho - _BLEND_LO) / (_BLEND_HI - _BLEND_LO), 0.0, 1.0)
    return _smooth_fall(t)


def _inner_batch(phi: Callable, rho: np.ndarray, w_cap: np.ndarray) -> np.ndarray:
    """integral over w in [0, w_cap] of phi(rho * sqrt(1 + w**2)), per point.

    Fixed geometric panel edges (0, 1/64, ..., 128) clipped to each point's
    cap keep the arrays rectangular; panels entirely beyond every cap are
    skipped.  The hard stop at w = 128 truncates only integrands decaying at
    least like w**(3-2N), a relative error below 128**(3-2N).
    """
    w_max = float(w_cap.max())
    if w_max <= 0.0:
        return np.zeros_like(rho)
    active = int(np.count_nonzero(_W_EDGES[:-1] < w_max))
    lo = np.minimum(_W_EDGES[:active][None, :], w_cap[:, None])
    hi = np.minimum(_W_EDGES[1 : active + 1][None, :], w_cap[:, None])
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, :, None] + half[:, :, None] * _GK_NODES
    t = rho[:, None, None] * np.sqrt(1.0 + pts * pts)
    vals = np.asarray(phi(t), dtype=float)
    return np.einsum("mpk,k,mp->m", vals, _GK_WK, half)


def _box_part(
    phi: Callable,
    tau: float,
    geom: BoundaryGeometry,
    p: HSParams,
    box_nodes: int,
    chunk: int = 1 << 14,
) -> float:
    """Blend-weighted sliver integral over the box |y'_i| <= 10, exactly tensorised.

    The integrand is even in every tangential coordinate (the floor height
    depends on squares only), so one orthant is integrated and scaled by
    2**(N-1).  Floor heights keep their sign: where the quadratic floor dips
    below the flat one the sliver contributes negatively.
    """
    d = p.N - 1
    alphas = np.asarray(geom.curvatures, dtype=float)
    nodes, weights = _gl_nodes(box_nodes)
    n_pts = box_nodes**d
    total = 0.0
    for start in range(0, n_pts, chunk):
        idx = np.arange(start, min(start + chunk, n_pts))
        y = np.empty((idx.size, d))
        wt = np.ones(idx.size)
        rem = idx
        for ax in range(d - 1, -1, -1):
            rem, k = np.divmod(rem, box_nodes)
            y[:, ax] = nodes[k]
            wt *= weights[k]
        rho = np.sqrt(np.einsum("md,md->m", y, y))
        floor = tau * 0.5 * ((y * y) @ alphas)
        psi = _blend(rho)
        keep = (psi > 0.0) & (floor != 0.0)
        if not np.any(keep):
            continue
        rk = rho[keep]
        fk = floor[keep]
        inner = _inner_batch(phi, rk, np.abs(fk) / rk) * rk * np.sign(fk)
        total += float(np.sum(wt[keep] * psi[keep] * inner))
    return total * 2.0**d


def _tail_part(
    phi: Callable,
    tau: float,
    geom: BoundaryGeometry,
    p: HSParams,
    cap: float | None,
    cfg: QuadratureSettings,
) -> float:
    """Radial tail of the sliver beyond the blend window.

    Outside |y'| = 8 the anisotropic floor is replaced by its spherical
    average tau * gamma * |y'|**2 with gamma = H / (2(N-1)) -- exact when all
    curvatures coincide, and correct to leading order otherwise because the
    inner integral is linear in the floor height wherever the height is
    small and saturates (becoming direction-independent) wherever it is not.
    """
    n = p.N
    gamma = geom.mean_curvature / (2.0 * (n - 1.0))
    if gamma == 0.0:
        return 0.0
    sgn = math.copysign(1.0, gamma)
    g = abs(gamma)
    omega = sphere_surface_area(n - 1)

    def integrand(rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        inner = _inner_batch(phi, rho, tau * g * rho) * rho
        return sgn * omega * (1.0 - _blend(rho)) * rho ** (n - 2.0) * inner

    knee = 1.0 / (tau * g)  # where the inner integral saturates
    if cap is None:
        split = _BLEND_HI * 2.0 if knee <= _BLEND_HI else min(8.0 * knee, 1e12)
        seeds = _geometric_seeds(_BLEND_LO, split)
        return integrate_improper(
            integrand, lo=_BLEND_LO, split=split, cfg=cfg, breakpoints=seeds
        )
    seeds = _geometric_seeds(_BLEND_LO, cap)
    if _BLEND_LO < knee < cap:
        seeds.append(knee)
    return adaptive_gauss_kronrod(
        integrand, _BLEND_LO, cap,
        rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
        max_subdivisions=cfg.max_subdivisions, breakpoints=seeds,
    )


def _resolve_box_nodes(p: HSParams, box_nodes: int | None) -> int:
    if box_nodes is not None:
        if box_nodes < 4:
            raise ValueError("box_nodes must be at least 4")
        return int(box_nodes)
    d = p.N - 1
    try:
        return _DEFAULT_BOX_NODES[d]
    except KeyError:
        raise ValueError(
            f"no default tensor resolution for {d} tangential axes; pass box_nodes"
        ) from None


def _check_dimension(geom: BoundaryGeometry, p: HSParams) -> None:
    if len(geom.curvatures) != p.N - 1:
        raise ValueError(
            f"need {p.N - 1} principal curvatures for dimension {p.N}, "
            f"got {len(geom.curvatures)}"
        )


def _sliver(
    phi: Callable,
    tau: float,
    geom: BoundaryGeometry,
    p: HSParams,
    cfg: QuadratureSettings,
    cap: float | None,
    box_nodes: int,
) -> float:
    if all(a == 0.0 for a in geom.curvatures):
        return 0.0
    return (
        _box_part(phi, tau, geom, p, box_nodes)
        + _tail_part(phi, tau, geom, p, cap, cfg)
    )


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def sliver_energy_integral(
    eps: float,
    geom: BoundaryGeometry,
    p: HSParams,
    cfg: QuadratureSettings | None = None,
    *,
    box_nodes: int | None = None,
) -> float:
    """Gradient energy of the pure bubble over the boundary-layer sliver.

    In concentration coordinates this is the integral of
    (N-2)**2 |y|**(2-2s) (1+|y|**(2-s))**(-2(N-s)/(2-s)) over the region
    between the flat floor y_N = 0 and the scaled quadratic floor
    y_N = eps**(1/(2-s)) * g(y').  It scales like eps**(1/(2-s)) for N >= 4
    and like eps**(1/(2-s)) * |ln eps| in dimension three, and vanishes
    identically for a flat patch.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    _check_dimension(geom, p)
    cfg = cfg or QuadratureSettings()
    tau = eps ** (1.0 / (2.0 - p.s))
    grad, _, _, _ = _profile_pack(p, tau, None)
    return _sliver(grad, tau, geom, p, cfg, None, _resolve_box_nodes(p, box_nodes))


def sliver_mass_integral(
    eps: float,
    geom: BoundaryGeometry,
    p: HSParams,
    cfg: QuadratureSettings | None = None,
    *,
    box_nodes: int | None = None,
) -> float:
    """Weighted critical mass of the pure bubble over the same sliver region.

    Integrand |y|**(-s) (1+|y|**(2-s))**(-2(N-s)/(2-s)); scales like
    eps**(1/(2-s)) in every dimension N >= 3.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    _check_dimension(geom, p)
    cfg = cfg or QuadratureSettings()
    tau = eps ** (1.0 / (2.0 - p.s))
    _, mass, _, _ = _profile_pack(p, tau, None)
    return _sliver(mass, tau, geom, p, cfg, None, _resolve_box_nodes(p, box_nodes))


def sliver_energy_leading_coefficient(
    geom: BoundaryGeometry, p: HSParams, cfg: QuadratureSettings | None = None
) -> float:
    """Limit of sliver_energy_integral / eps**(1/(2-s)) as eps -> 0 (N >= 4).

    Equals H * (N-2)**2 / (2(N-1)) * omega_{N-2} * integral of
    r**(N+2-2s) (1+r**(2-s))**(-2(N-s)/(2-s)) dr.  In dimension three that
    radial moment diverges (the sliver energy carries an extra logarithm)
    and Divergent is raised.
    """
    _check_dimension(geom, p)
    n, s = p.N, p.s
    b = 2.0 * (n - s) / (2.0 - s)
    moment = integrate_radial_power(RadialPowerIntegrand(n + 2.0 - 2.0 * s, b, s), cfg)
    return (
        geom.mean_curvature * (n - 2.0) ** 2 / (2.0 * (n - 1.0))
        * sphere_surface_area(n - 1) * moment
    )


def sliver_mass_leading_coefficient(
    geom: BoundaryGeometry, p: HSParams, cfg: QuadratureSettings | None = None
) -> float:
    """Limit of sliver_mass_integral / eps**(1/(2-s)) as eps -> 0 (all N >= 3)."""
    _check_dimension(geom, p)
    n, s = p.N, p.s
    b = 2.0 * (n - s) / (2.0 - s)
    moment = integrate_radial_power(RadialPowerIntegrand(n - s, b, s), cfg)
    return geom.mean_curvature / (2.0 * (n - 1.0)) * sphere_surface_area(n - 1) * moment


def _half_space_radial(
    phi: Callable,
    n: int,
    cap: float,
    cfg: QuadratureSettings,
    extra_breaks: Sequence[float] = (),
) -> float:
    """(1/2) * omega_{N-1} * integral over (0, cap) of phi(rho) * rho**(N-1)."""

    def integrand(rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return phi(rho) * rho ** (n - 1.0)

    seeds = _geometric_seeds(0.0, cap) + [b for b in extra_breaks if 0.0 < b < cap]
    value = adaptive_gauss_kronrod(
        integrand, 0.0, cap,
        rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
        max_subdivisions=cfg.max_subdivisions, breakpoints=seeds,
    )
    return 0.5 * sphere_surface_area(n) * value


def bubble_energies(
    eps: float,
    geom: BoundaryGeometry,
    cut: CutoffSpec,
    far_sites: Sequence[tuple[float, float]],
    p: HSParams,
    cfg: QuadratureSettings | None = None,
    *,
    box_nodes: int | None = None,
) -> EnergyBreakdown:
    """Direct quadrature of every energy piece over the curved model domain.

    ``far_sites`` lists (distance, s_i) pairs of additional singular sites;
    each must sit at distance >= 3*delta so the bound |x - x_i| >= delta
    holds on the cutoff support, and its mass is computed under that proxy
    weight delta**(-s_i).  Every entry (including the plain L2 mass and the
    far masses) is the half-space radial integral minus the corresponding
    sliver, i.e. an integral over the region above the quadratic floor.

    Raises EpsTooLarge when tau = eps**(1/(2-s)) exceeds delta/10, where the
    concentration scale is no longer separated from the patch scale.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    _check_dimension(geom, p)
    if not math.isclose(cut.delta, geom.delta, rel_tol=1e-12):
        raise ValueError("cutoff radius and geometry patch radius must agree")
    cfg = cfg or QuadratureSettings()
    delta = geom.delta
    tau = eps ** (1.0 / (2.0 - p.s))
    if tau > delta / 10.0:
        raise EpsTooLarge(
            f"eps**(1/(2-s)) = {tau:.3e} exceeds delta/10 = {delta / 10.0:.3e}"
        )
    sites = [(float(d), float(si)) for d, si in far_sites]
    for dist, si in sites:
        if dist < 3.0 * delta - 1e-12 * delta:
            raise ValueError(f"far site at distance {dist} closer than 3*delta")
        if not (0.0 < si < 2.0):
            raise ValueError("far-site exponent must lie in (0, 2)")

    nodes = _resolve_box_nodes(p, box_nodes)
    cap = 2.0 * delta / tau
    kink = delta / tau
    grad, mass, l2, powq = _profile_pack(p, tau, cut)

    sliver_e = _sliver(grad, tau, geom, p, cfg, cap, nodes)
    sliver_m = _sliver(mass, tau, geom, p, cfg, cap, nodes)
    grad_energy = _half_space_radial(grad, p.N, cap, cfg, (kink,)) - sliver_e
    near_mass = _half_space_radial(mass, p.N, cap, cfg, (kink,)) - sliver_m
    l2_mass = tau**2 * (
        _half_space_radial(l2, p.N, cap, cfg, (kink,))
        - _sliver(l2, tau, geom, p, cfg, cap, nodes)
    )
    far = []
    for dist, si in sites:
        qi = 2.0 * (p.N - si) / (p.N - 2.0)
        phi = powq(qi)
        value = (
            _half_space_radial(phi, p.N, cap, cfg, (kink,))
            - _sliver(phi, tau, geom, p, cfg, cap, nodes)
        )
        far.append(tau**si * delta ** (-si) * value)

    return EnergyBreakdown(
        eps=eps,
        grad_energy=grad_energy,
        near_mass=near_mass,
        far_masses=tuple(far),
        l2_mass=l2_mass,
        sliver_energy=sliver_e,
        sliver_mass=sliver_m,
    )


def ray_peak_energy(b: EnergyBreakdown, lam: float, p: HSParams) -> RayPeak:
    """Maximum of the energy along the ray t -> t * (cutoff bubble).

    The ray energy is (1/2) A t**2 - (1/q) B t**q with A = grad_energy +
    lam * l2_mass, B = near_mass + sum(far_masses) and q the critical
    exponent 2(N-s)/(N-2); its maximiser is t* = (A/B)**(1/(q-2)) and the
    peak value is (1/2 - 1/q) * A * t***2.
    """
    q = p.two_star
    a = b.grad_energy + lam * b.l2_mass
    total_mass = b.near_mass + sum(b.far_masses)
    if total_mass <= 0.0:
        raise DegenerateDenominator("the ray energy needs a positive mass term")
    if a <= 0.0:
        raise ValueError("nonpositive quadratic coefficient: the ray has no peak")
    t_star = (a / total_mass) ** (1.0 / (q - 2.0))
    return RayPeak(scale=t_star, value=(0.5 - 1.0 / q) * a * t_star**2)


def threshold_inequality_check(
    eps_list: Sequence[float],
    geom: BoundaryGeometry,
    cut: CutoffSpec,
    far_sites: Sequence[tuple[float, float]],
    lam: float,
    p: HSParams,
    cfg: QuadratureSettings | None = None,
    *,
    box_nodes: int | None = None,
) -> MarginReport:
    """Audit the mountain-pass ray against the boundary compactness threshold.

    For each eps the full energy breakdown is computed, the ray maximum is
    taken, and the margin threshold - peak is reported (threshold = the
    boundary-placement compactness level for the concentration exponent).
    With positive mean curvature the margin is positive for small eps but
    decays like eps**(1/(2-s)); the scaled margin margin/eps**(1/(2-s))
    increases toward a positive limit as eps decreases, and that
    monotonicity is what ``scaled_margin_increasing`` certifies.  A flat
    patch never produces strictly positive margins (the report then carries
    ``strict_margin=False``).
    """
    eps_sorted = sorted((float(e) for e in eps_list), reverse=True)
    if not eps_sorted:
        raise ValueError("eps_list must be nonempty")
    threshold = ps_threshold(
        p.N, [SingularitySite(Placement.BOUNDARY, p.s)], cfg
    ).overall
    rows = []
    for eps in eps_sorted:
        b = bubble_energies(eps, geom, cut, far_sites, p, cfg, box_nodes=box_nodes)
        peak = ray_peak_energy(b, lam, p).value
        margin = threshold - peak
        rows.append(
            MarginRow(
                eps=eps,
                peak=peak,
                margin=margin,
                scaled_margin=margin / eps ** (1.0 / (2.0 - p.s)),
            )
        )
    scaled = [r.scaled_margin for r in rows]
    return MarginReport(
        threshold=threshold,
        rows=tuple(rows),
        strict_margin=all(r.margin > 0.0 for r in rows),
        scaled_margin_increasing=all(b > a for a, b in zip(scaled[:-1], scaled[1:])),
    )


# ---------------------------------------------------------------------------
# slope fitting
# ---------------------------------------------------------------------------


def _as_positive_arrays(eps_values, values) -> tuple[np.ndarray, np.ndarray]:
    e = np.asarray(list(eps_values), dtype=float)
    v = np.asarray(list(values), dtype=float)
    if e.shape != v.shape or e.ndim != 1 or e.size < 2:
        raise ValueError("need two equal-length 1-D samples with at least 2 points")
    if not (np.all(np.isfinite(e)) and np.all(np.isfinite(v)) and np.all(e > 0.0)):
        raise ValueError("samples must be finite with positive eps")
    return e, v


def fit_log_slope(eps_values: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ln(value) against ln(eps); values must be positive."""
    e, v = _as_positive_arrays(eps_values, values)
    if not np.all(v > 0.0):
        raise ValueError("log-log fit needs positive values")
    x = np.log(e)
    design = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(design, np.log(v), rcond=None)
    return float(coef[0])


def fit_power_log_basis(
    eps_values: Sequence[float], values: Sequence[float], power: float
) -> tuple[float, float]:
    """Least-squares fit  value = c1 * eps**power * ln(1/eps) + c2 * eps**power.

    Returns (c1, c2).  This is the two-basis form of the dimension-three
    gradient-energy deficit, where the leading coefficient of the plain
    power law is replaced by a logarithmically growing factor.
    """
    e, v = _as_positive_arrays(eps_values, values)
    base = e**power
    design = np.stack([base * np.log(1.0 / e), base], axis=1)
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    return float(coef[0]), float(coef[1])
