"""Discrete energy functional and mountain-pass solver on a Neumann box.

The domain is an axis-aligned box with a uniform vertex-centered grid per
axis (nodes include the faces).  The energy of a node field u is

    (1/2) * sum(|grad u|**2 + lambda u**2) - sum_i (1/q_i) * int w_i * u_+**q_i

with q_i = 2(N - s_i)/(N - 2) and w_i the discretised singular weight
|x - x_i|**(-s_i).  The Dirichlet part is assembled edge by edge (squared
forward differences times edge volumes, transverse trapezoid weights), which
is exactly the variational form of the ghost-node reflection Neumann
stencil: its Euler derivative at a face node is the reflected second-order
formula, so the gradient returned here is the exact derivative of the
energy actually evaluated.

The solver minimises the energy over the Nehari set (fields with
d/dt energy(t u) = 0 at t = 1): each iteration rescales the iterate to its
Nehari point, takes a Barzilai-Borwein step along the negative gradient
(by default the Riesz representative of the derivative in the
(grad, grad) + lambda (., .) inner product, applied exactly through fast
cosine transforms), and backtracks until the composed move decreases the
Nehari-point energy.  Fields are plain numpy arrays shaped like the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .extremals import HSParams, bubble_radial
from .identities import Placement, SingularitySite, ps_threshold

__all__ = [
    "BubbleAt",
    "Constant",
    "Custom",
    "DomainGrid",
    "NonpositiveLambda",
    "NonpositivePart",
    "PositiveLambda",
    "PositivityReport",
    "ProblemConfig",
    "ShapeMismatch",
    "Singularity",
    "SolveOptions",
    "SolveReport",
    "bubble_field",
    "critical_exponent",
    "energy",
    "gradient",
    "load_field",
    "mountain_pass_solve",
    "negative_lambda_sanity",
    "nehari_scale",
    "node_volumes",
    "placement_of",
    "positivity_check",
    "save_field",
    "singular_weight",
]


class ShapeMismatch(ValueError):
    """Field shape does not match the grid."""


class NonpositivePart(ValueError):
    """Operation needs a field whose positive part is not identically zero."""


class NonpositiveLambda(ValueError):
    """The solver requires a strictly positive zeroth-order coefficient."""


class PositiveLambda(ValueError):
    """The nonpositive-coefficient sanity check was called with lambda > 0."""


# ---------------------------------------------------------------------------
# grid and problem data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainGrid:
    """Uniform vertex-centered grid on an axis-aligned box.

    ``bounds`` is a tuple of (lo, hi) pairs, one per axis; ``nodes_per_axis``
    counts the nodes along each axis (faces included), at least 8 each.
    Node volumes are trapezoid products (half-weight dual cells at faces),
    so they sum exactly to the box volume.
    """

    bounds: tuple[tuple[float, float], ...]
    nodes_per_axis: tuple[int, ...]

    def __post_init__(self) -> None:
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        nodes = tuple(int(n) for n in self.nodes_per_axis)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "nodes_per_axis", nodes)
        if not bounds:
            raise ValueError("bounds must be nonempty")
        if len(nodes) != len(bounds):
            raise ValueError("nodes_per_axis must match the number of axes")
        for lo, hi in bounds:
            if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
                raise ValueError("each axis needs finite bounds with hi > lo")
        if any(n < 8 for n in nodes):
            raise ValueError("need at least 8 nodes per axis")

    @property
    def N(self) -> int:
        return len(self.bounds)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.nodes_per_axis

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.nodes_per_axis)
        )

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds]))

    def axis_nodes(self, k: int) -> np.ndarray:
        lo, hi = self.bounds[k]
        return np.linspace(lo, hi, self.nodes_per_axis[k])


def _axis_weights(grid: DomainGrid, k: int) -> np.ndarray:
    """Trapezoid dual-cell lengths along axis k (sum = axis length)."""
    n = grid.nodes_per_axis[k]
    h = grid.spacing[k]
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@lru_cache(maxsize=64)
def _node_volumes(grid: DomainGrid) -> np.ndarray:
    vol = np.ones(grid.shape)
    for k in range(grid.N):
        shape = [1] * grid.N
        shape[k] = grid.nodes_per_axis[k]
        vol = vol * _axis_weights(grid, k).reshape(shape)
    vol.flags.writeable = False
    return vol


def node_volumes(grid: DomainGrid) -> np.ndarray:
    """Per-node dual-cell volumes (trapezoid product; sums to the box volume)."""
    return _node_volumes(grid)


@lru_cache(maxsize=64)
def _edge_volumes(grid: DomainGrid, axis: int) -> np.ndarray:
    """Edge dual volumes for forward differences along ``axis``."""
    shape = list(grid.shape)
    shape[axis] -= 1
    ev = np.ones(shape)
    for k in range(grid.N):
        rs = [1] * grid.N
        rs[k] = shape[k]
        if k == axis:
            ev = ev * np.full(shape[k], grid.spacing[axis]).reshape(rs)
        else:
            ev = ev * _axis_weights(grid, k).reshape(rs)
    ev.flags.writeable = False
    return ev


@dataclass(frozen=True)
class Singularity:
    """A singular site: location inside the closed box and exponent s in (0,2)."""

    location: tuple[float, ...]
    s: float

    def __post_init__(self) -> None:
        loc = tuple(float(x) for x in self.location)
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "s", float(self.s))
        if not all(math.isfinite(x) for x in loc):
            raise ValueError("location must be finite")
        if not (0.0 < self.s < 2.0):
            raise ValueError("exponent s must lie in (0, 2)")


def critical_exponent(n: int, s: float) -> float:
    """The weighted critical power 2(N - s)/(N - 2)."""
    return 2.0 * (n - s) / (n - 2.0)


def placement_of(grid: DomainGrid, sing: Singularity) -> Placement:
    """Boundary placement iff the site sits within half a cell of some face."""
    if len(sing.location) != grid.N:
        raise ValueError("singularity dimension does not match the grid")
    for (lo, hi), h, x in zip(grid.bounds, grid.spacing, sing.location):
        if x <= lo + 0.5 * h or x >= hi - 0.5 * h:
            return Placement.BOUNDARY
    return Placement.INTERIOR


@dataclass(frozen=True)
class ProblemConfig:
    """Grid, zeroth-order coefficient, and the list of singular sites."""

    grid: DomainGrid
    lam: float
    singularities: tuple[Singularity, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lam", float(self.lam))
        sings = tuple(self.singularities)
        object.__setattr__(self, "singularities", sings)
        if not math.isfinite(self.lam):
            raise ValueError("lambda must be finite")
        if not sings:
            raise ValueError("need at least one singular site")
        for sing in sings:
            if len(sing.location) != self.grid.N:
                raise ValueError("singularity dimension does not match the grid")
            for (lo, hi), x in zip(self.grid.bounds, sing.location):
                if not (lo - 1e-12 <= x <= hi + 1e-12):
                    raise ValueError(f"singularity location {sing.location} outside box")
        for i in range(len(sings)):
            for j in range(i + 1, len(sings)):
                gap = math.dist(sings[i].location, sings[j].location)
                if gap < 1e-12:
                    raise ValueError("singular sites must be pairwise distinct")

    def exponents(self) -> tuple[float, ...]:
        n = self.grid.N
        return tuple(critical_exponent(n, sing.s) for sing in self.singularities)


def _check_field(grid: DomainGrid, u) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if arr.shape != grid.shape:
        raise ShapeMismatch(f"field shape {arr.shape} does not match grid {grid.shape}")
    return arr


# ---------------------------------------------------------------------------
# singular weights
# ---------------------------------------------------------------------------


def _distance_sq(grid: DomainGrid, location: Sequence[float]) -> np.ndarray:
    r2 = np.zeros(grid.shape)
    for k in range(grid.N):
        shape = [1] * grid.N
        shape[k] = grid.nodes_per_axis[k]
        r2 = r2 + ((grid.axis_nodes(k) - location[k]) ** 2).reshape(shape)
    return r2


def _cell_average(grid: DomainGrid, index: tuple[int, ...], location, s: float) -> float:
    """Average of |x - location|**(-s) over the node's clipped dual cell.

    Uses an 8x-per-axis midpoint refinement; midpoints never coincide with
    ``location`` even when it is exactly the node, and the kernel is locally
    integrable for s < 2 <= N, so the average is finite.
    """
    refine = 8
    axes_pts = []
    for k, j in enumerate(index):
        lo, hi = grid.bounds[k]
        h = grid.spacing[k]
        x = grid.axis_nodes(k)[j]
        a, b = max(lo, x - 0.5 * h), min(hi, x + 0.5 * h)
        axes_pts.append(a + (np.arange(refine) + 0.5) * (b - a) / refine)
    r2 = np.zeros((refine,) * grid.N)
    for k, pts in enumerate(axes_pts):
        shape = [1] * grid.N
        shape[k] = refine
        r2 = r2 + ((pts - location[k]) ** 2).reshape(shape)
    return float(np.mean(r2 ** (-0.5 * s)))


@lru_cache(maxsize=64)
def _weights_cached(grid: DomainGrid, sing: Singularity) -> np.ndarray:
    loc = sing.location
    with np.errstate(divide="ignore"):
        w = _distance_sq(grid, loc) ** (-0.5 * sing.s)
    center = tuple(
        int(np.clip(round((loc[k] - grid.bounds[k][0]) / grid.spacing[k]), 0,
                    grid.nodes_per_axis[k] - 1))
        for k in range(grid.N)
    )
    ranges = [
        range(max(0, c - 2), min(n, c + 3))
        for c, n in zip(center, grid.nodes_per_axis)
    ]
    idx = np.meshgrid(*[np.asarray(list(r)) for r in ranges], indexing="ij")
    for flat in zip(*(a.ravel() for a in idx)):
        w[tuple(int(i) for i in flat)] = _cell_average(grid, flat, loc, sing.s)
    w.flags.writeable = False
    return w


def singular_weight(grid: DomainGrid, sing: Singularity) -> np.ndarray:
    """Per-node weights discretising |x - x_i|**(-s_i).

    Nodes within two cells (per axis) of the site get the cell average of
    the kernel over their dual cell (8x-refined midpoint rule, clipped at
    the box); all other nodes get the point value.  The array is cached and
    read-only.
    """
    return _weights_cached(grid, sing)


# ---------------------------------------------------------------------------
# energy, gradient, Nehari scaling
# ---------------------------------------------------------------------------


def _quadratic_part(u: np.ndarray, cfg: ProblemConfig) -> float:
    """sum(|grad u|**2) + lambda * sum(u**2), both volume-weighted."""
    grid = cfg.grid
    total = 0.0
    for k in range(grid.N):
        d = np.diff(u, axis=k) / grid.spacing[k]
        total += float(np.sum(d * d * _edge_volumes(grid, k)))
    total += cfg.lam * float(np.sum(u * u * _node_volumes(grid)))
    return total


def _positive_masses(u: np.ndarray, cfg: ProblemConfig) -> list[float]:
    """Per-site weighted masses int w_i * u_+**q_i."""
    vol = _node_volumes(cfg.grid)
    up = np.maximum(u, 0.0)
    out = []
    for sing, q in zip(cfg.singularities, cfg.exponents()):
        w = _weights_cached(cfg.grid, sing)
        out.append(float(np.sum(w * up**q * vol)))
    return out


def energy(u, cfg: ProblemConfig) -> float:
    """(1/2) quadratic part minus the weighted critical masses of u_+."""
    arr = _check_field(cfg.grid, u)
    masses = _positive_masses(arr, cfg)
    value = 0.5 * _quadratic_part(arr, cfg)
    for m, q in zip(masses, cfg.exponents()):
        value -= m / q
    return value


def gradient(u, cfg: ProblemConfig) -> np.ndarray:
    """Exact derivative field G: plain-dot(G, phi) = d/dt energy(u + t phi).

    Equivalently the reflected Neumann stencil -Lap u + lambda u minus
    sum_i w_i u_+**(q_i - 1), multiplied by the node volumes.
    """
    grid = cfg.grid
    arr = _check_field(grid, u)
    g = cfg.lam * arr * _node_volumes(grid)
    for k in range(grid.N):
        d = np.diff(arr, axis=k) / grid.spacing[k]
        flux = d * _edge_volumes(grid, k) / grid.spacing[k]
        left = [slice(None)] * grid.N
        right = [slice(None)] * grid.N
        left[k] = slice(0, -1)
        right[k] = slice(1, None)
        g[tuple(right)] += flux
        g[tuple(left)] -= flux
    up = np.maximum(arr, 0.0)
    vol = _node_volumes(grid)
    for sing, q in zip(cfg.singularities, cfg.exponents()):
        g -= _weights_cached(grid, sing) * up ** (q - 1.0) * vol
    return g


def nehari_scale(u, cfg: ProblemConfig) -> float:
    """The t > 0 with d/dt energy(t u) = 0, i.e. the ray's peak scale.

    Closed form (quadratic over masses to the power 1/(q-2)) when all sites
    share one exponent; otherwise a bracketed Newton iteration on the
    strictly monotone scalar equation sum_i m_i t**(q_i-2) = quadratic.
    """
    arr = _check_field(cfg.grid, u)
    masses = _positive_masses(arr, cfg)
    if all(m <= 0.0 for m in masses):
        raise NonpositivePart("the positive part of the field vanishes")
    a = _quadratic_part(arr, cfg)
    if a <= 0.0:
        raise ValueError("nonpositive quadratic part: no positive ray peak")
    qs = cfg.exponents()
    terms = [(m, q) for m, q in zip(masses, qs) if m > 0.0]
    if all(abs(q - terms[0][1]) < 1e-12 for _, q in terms):
        q = terms[0][1]
        return (a / sum(m for m, _ in terms)) ** (1.0 / (q - 2.0))
    # mixed exponents: solve sum m_i exp((q_i-2) x) = a for x = ln t;
    # the left side is strictly increasing and log-convex in x.
    q_mean = sum(q for _, q in terms) / len(terms)
    x = math.log((a / sum(m for m, _ in terms)) ** (1.0 / (q_mean - 2.0)))

    def f_and_slope(x: float) -> tuple[float, float]:
        val = sum(m * math.exp((q - 2.0) * x) for m, q in terms)
        slope = sum(m * (q - 2.0) * math.exp((q - 2.0) * x) for m, q in terms)
        return val - a, slope

    lo, hi = x, x
    flo, _ = f_and_slope(lo)
    fhi = flo
    for _ in range(200):
        if flo < 0.0 < fhi:
            break
        if flo > 0.0:
            lo -= 1.0
            flo, _ = f_and_slope(lo)
        if fhi < 0.0:
            hi += 1.0
            fhi, _ = f_and_slope(hi)
    else:  # pragma: no cover - the scalar equation always brackets
        raise RuntimeError("failed to bracket the ray-peak equation")
    for _ in range(100):
        fx, slope = f_and_slope(x)
        if fx > 0.0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        step = fx / slope if slope > 0.0 else 0.0
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) < 1e-15 * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    return math.exp(x)


# ---------------------------------------------------------------------------
# fast Neumann inverse (descent metric)
# ---------------------------------------------------------------------------


def _dct1(a: np.ndarray, axis: int) -> np.ndarray:
    """Unnormalised type-I cosine transform along ``axis`` (involutive up to
    the factor 2(n-1)), computed through an even extension and a real FFT."""
    n = a.shape[axis]
    middle = np.flip(
        np.take(a, np.arange(1, n - 1), axis=axis), axis=axis
    )
    ext = np.concatenate([a, middle], axis=axis)
    return np.fft.rfft(ext, axis=axis).real


@lru_cache(maxsize=64)
def _neumann_symbol(grid: DomainGrid, lam: float) -> np.ndarray:
    sym = np.full(grid.shape, lam)
    for k in range(grid.N):
        n = grid.nodes_per_axis[k]
        h = grid.spacing[k]
        eig = (2.0 - 2.0 * np.cos(np.pi * np.arange(n) / (n - 1))) / h**2
        shape = [1] * grid.N
        shape[k] = n
        sym = sym + eig.reshape(shape)
    sym.flags.writeable = False
    return sym


def _h1_riesz(residual: np.ndarray, grid: DomainGrid, lam: float) -> np.ndarray:
    """Solve (-Lap + lam) z = residual exactly for the reflected stencil."""
    z = residual
    for k in range(grid.N):
        z = _dct1(z, k)
    z = z / _neumann_symbol(grid, lam)
    scale = 1.0
    for k in range(grid.N):
        z = _dct1(z, k)
        scale *= 2.0 * (grid.nodes_per_axis[k] - 1)
    return z / scale


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BubbleAt:
    """Start from a concentrated bubble at one singular site (index into the
    config's list; None picks the site with the smallest compactness level).
    ``eps`` defaults to 4 times the largest grid spacing."""

    site: int | None = None
    eps: float | None = None


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Custom:
    values: object


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 20000
    grad_tol: float = 1e-6
    armijo: float = 1e-4
    step_init: float = 1.0
    step_min: float = 1e-14
    step_max: float = 1e6
    metric: str = "h1"  # "h1": exact inverse-stencil Riesz map; "l2": raw residual

    def __post_init__(self) -> None:
        if self.metric not in ("h1", "l2"):
            raise ValueError("metric must be 'h1' or 'l2'")
        if self.max_iters < 1 or self.grad_tol <= 0.0:
            raise ValueError("max_iters must be >= 1 and grad_tol > 0")


@dataclass(frozen=True)
class SolveReport:
    energy: float
    residual_sup: float
    min_value: float
    iterations: int
    threshold: float
    below_threshold: bool
    converged: bool

    def __post_init__(self) -> None:
        if self.below_threshold != (self.energy < self.threshold):
            raise ValueError("below_threshold must equal energy < threshold")


def _threshold_for(cfg: ProblemConfig) -> float:
    sites = [
        SingularitySite(placement_of(cfg.grid, sing), sing.s)
        for sing in cfg.singularities
    ]
    return ps_threshold(cfg.grid.N, sites).overall


def bubble_field(grid: DomainGrid, location: Sequence[float], eps: float,
                 s: float) -> np.ndarray:
    """Discretised radial bubble profile centred at ``location``."""
    p = HSParams(grid.N, s)
    r = np.sqrt(_distance_sq(grid, tuple(float(x) for x in location)))
    return bubble_radial(r, eps, p)


def _initial_field(cfg: ProblemConfig, init) -> np.ndarray:
    grid = cfg.grid
    if init is None:
        init = BubbleAt()
    if isinstance(init, Custom):
        return _check_field(grid, init.values).copy()
    if isinstance(init, Constant):
        if not (init.value > 0.0 and math.isfinite(init.value)):
            raise ValueError("constant initial value must be positive")
        return np.full(grid.shape, float(init.value))
    if isinstance(init, BubbleAt):
        if init.site is None:
            levels = ps_threshold(
                grid.N,
                [SingularitySite(placement_of(grid, s_), s_.s)
                 for s_ in cfg.singularities],
            ).per_site
            site = min(range(len(levels)), key=lambda i: levels[i][1])
        else:
            site = int(init.site)
            if not 0 <= site < len(cfg.singularities):
                raise ValueError("site index out of range")
        sing = cfg.singularities[site]
        if init.eps is not None:
            eps = float(init.eps)
            if eps <= 0.0:
                raise ValueError("eps must be positive")
        else:
            eps = 4.0 * max(grid.spacing)
        return bubble_field(grid, sing.location, eps, sing.s)
    raise TypeError("init must be BubbleAt, Constant, Custom, or None")


def mountain_pass_solve(
    cfg: ProblemConfig,
    init: BubbleAt | Constant | Custom | None = None,
    opts: SolveOptions | None = None,
) -> tuple[SolveReport, np.ndarray]:
    """Minimise the energy over the Nehari set by projected descent.

    Every iterate is rescaled to its ray peak (Nehari point); a
    Barzilai-Borwein step along the negative gradient representative is
    backtracked until the rescaled energy decreases (Armijo test against
    the directional slope, which on the Nehari set equals the full one).
    Convergence means the sup norm of the pointwise Euler-Lagrange residual
    -Lap u + lambda u - sum w_i u_+**(q_i-1) drops below ``grad_tol``.
    Failure to converge is reported (``converged=False``), never raised.
    """
    if cfg.lam <= 0.0:
        raise NonpositiveLambda("the solver requires lambda > 0")
    opts = opts or SolveOptions()
    grid = cfg.grid
    vol = _node_volumes(grid)
    threshold = _threshold_for(cfg)

    v = _initial_field(cfg, init)
    v = nehari_scale(v, cfg) * v  # raises NonpositivePart on a hopeless start
    e_v = energy(v, cfg)

    step = opts.step_init
    prev_v = None
    prev_dir = None
    residual_sup = math.inf
    converged = False
    iterations = 0

    for _ in range(opts.max_iters):
        g = gradient(v, cfg)
        residual = g / vol
        residual_sup = float(np.max(np.abs(residual)))
        if residual_sup < opts.grad_tol:
            converged = True
            break
        if opts.metric == "h1":
            direction = _h1_riesz(residual, grid, cfg.lam)
        else:
            direction = residual
        slope = float(np.sum(direction * g))
        if not math.isfinite(slope) or slope <= 0.0:
            break  # gradient representation broke down; report honestly
        if prev_v is not None:
            s_vec = v - prev_v
            y_vec = direction - prev_dir
            sy = float(np.sum(s_vec * y_vec))
            if sy > 0.0:
                step = float(np.sum(s_vec * s_vec)) / sy
        step = min(max(step, opts.step_min), opts.step_max)

        accepted = False
        t = step
        for _ in range(80):
            candidate = v - t * direction
            try:
                scaled = nehari_scale(candidate, cfg) * candidate
            except (NonpositivePart, ValueError):
                t *= 0.5
                continue
            e_new = energy(scaled, cfg)
            if math.isfinite(e_new) and e_new <= e_v - opts.armijo * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        prev_v, prev_dir = v, direction
        v, e_v = scaled, e_new
        step = t
        iterations += 1

    min_value = float(np.min(v))
    report = SolveReport(
        energy=e_v,
        residual_sup=residual_sup,
        min_value=min_value,
        iterations=iterations,
        threshold=threshold,
        below_threshold=bool(e_v < threshold),
        converged=converged,
    )
    return report, v


class PositivityReport(NamedTuple):
    min_value: float
    positive: bool


def positivity_check(u) -> PositivityReport:
    """Minimum node value and whether it is strictly positive."""
    arr = np.asarray(u, dtype=float)
    m = float(np.min(arr))
    return PositivityReport(min_value=m, positive=bool(m > 0.0))


def negative_lambda_sanity(cfg: ProblemConfig, c_samples: Sequence[float]) -> bool:
    """True iff energy(constant c) < 0 for every sampled c > 0 (lambda <= 0).

    With lambda <= 0 both energy terms of a positive constant are
    nonpositive and the mass term is strictly negative, so constants are
    never near-solutions; this op verifies that numerically.
    """
    if cfg.lam > 0.0:
        raise PositiveLambda("sanity check applies to lambda <= 0 only")
    samples = [float(c) for c in c_samples]
    if not samples or any(c <= 0.0 for c in samples):
        raise ValueError("c_samples must be positive reals")
    return all(
        energy(np.full(cfg.grid.shape, c), cfg) < 0.0 for c in samples
    )


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


def save_field(path, grid: DomainGrid, values) -> None:
    """Write a field snapshot: float64 header (N, nodes_per_axis, bounds
    pairs) followed by the row-major float64 node values."""
    arr = _check_field(grid, values)
    header = [float(grid.N)]
    header.extend(float(n) for n in grid.nodes_per_axis)
    for lo, hi in grid.bounds:
        header.extend((lo, hi))
    with open(path, "wb") as fh:
        fh.write(np.asarray(header, dtype=np.float64).tobytes())
        fh.write(np.ascontiguousarray(arr, dtype=np.float64).tobytes())


def load_field(path) -> tuple[DomainGrid, np.ndarray]:
    """Read a snapshot written by save_field."""
    raw = np.fromfile(path, dtype=np.float64)
    if raw.size < 1:
        raise ValueError("empty snapshot")
    n_axes = int(raw[0])
    header_len = 1 + n_axes + 2 * n_axes
    if n_axes < 1 or raw.size < header_len:
        raise ValueError("truncated snapshot header")
    nodes = tuple(int(x) for x in raw[1 : 1 + n_axes])
    bounds = tuple(
        (raw[1 + n_axes + 2 * k], raw[2 + n_axes + 2 * k]) for k in range(n_axes)
    )
    grid = DomainGrid(bounds=bounds, nodes_per_axis=nodes)
    count = int(np.prod(nodes))
    body = raw[header_len:]
    if body.size != count:
        raise ValueError("snapshot body does not match the grid size")
    return grid, body.reshape(nodes)
