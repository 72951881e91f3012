"""Discrete energy, gradient, Nehari projection, and the ground-state solver."""

import math

import numpy as np
import pytest

from hslab.boundary_energy import BoundaryGeometry, CutoffSpec, bubble_energies
from hslab.extremals import HSParams
from hslab.identities import Placement, SingularitySite, ps_threshold
from hslab.quadrature import integrate_box
from hslab.variational import (
    BubbleAt,
    Constant,
    Custom,
    DomainGrid,
    NonpositiveLambda,
    NonpositivePart,
    PositiveLambda,
    ProblemConfig,
    ShapeMismatch,
    Singularity,
    SolveOptions,
    SolveReport,
    bubble_field,
    critical_exponent,
    energy,
    gradient,
    load_field,
    mountain_pass_solve,
    negative_lambda_sanity,
    nehari_scale,
    node_volumes,
    placement_of,
    positivity_check,
    save_field,
    singular_weight,
)

UNIT3 = ((0.0, 1.0),) * 3
CENTER = (0.5, 0.5, 0.5)


def unit_config(nodes=9, lam=1.0, sites=None):
    grid = DomainGrid(UNIT3, (nodes,) * 3)
    if sites is None:
        sites = (Singularity(CENTER, 1.0),)
    return ProblemConfig(grid, lam, tuple(sites))


class TestGrid:
    def test_geometry_properties(self):
        grid = DomainGrid(((0.0, 2.0), (0.0, 1.0)), (9, 17))
        assert grid.N == 2
        assert grid.shape == (9, 17)
        assert grid.spacing == pytest.approx((0.25, 0.0625))
        assert grid.volume == pytest.approx(2.0, rel=1e-14)
        nodes = grid.axis_nodes(0)
        assert nodes[0] == 0.0 and nodes[-1] == 2.0

    def test_node_volumes_tile_the_box(self):
        grid = DomainGrid(UNIT3, (9, 11, 13))
        vol = node_volumes(grid)
        assert vol.shape == grid.shape
        assert float(np.sum(vol)) == pytest.approx(grid.volume, rel=1e-13)
        # faces carry half cells, corners an eighth
        h = np.prod(grid.spacing)
        assert vol[0, 0, 0] == pytest.approx(h / 8.0, rel=1e-13)
        assert vol[4, 5, 6] == pytest.approx(h, rel=1e-13)

    def test_rejects_tiny_axes(self):
        with pytest.raises(ValueError):
            DomainGrid(UNIT3, (4, 9, 9))
        with pytest.raises(ValueError):
            DomainGrid(((1.0, 0.0),) * 3, (9, 9, 9))


class TestProblemConfig:
    def test_exponents(self):
        cfg = unit_config()
        assert cfg.exponents() == pytest.approx((4.0,))
        assert critical_exponent(3, 1.0) == pytest.approx(4.0, rel=1e-15)

    def test_site_outside_box_rejected(self):
        grid = DomainGrid(UNIT3, (9,) * 3)
        with pytest.raises(ValueError):
            ProblemConfig(grid, 1.0, (Singularity((1.5, 0.5, 0.5), 1.0),))

    def test_duplicate_sites_rejected(self):
        grid = DomainGrid(UNIT3, (9,) * 3)
        with pytest.raises(ValueError):
            ProblemConfig(
                grid, 1.0,
                (Singularity(CENTER, 1.0), Singularity(CENTER, 0.5)),
            )

    def test_empty_site_tuple_rejected(self):
        grid = DomainGrid(UNIT3, (9,) * 3)
        with pytest.raises(ValueError):
            ProblemConfig(grid, 1.0, ())

    def test_placement_dispatch(self):
        grid = DomainGrid(UNIT3, (9,) * 3)
        h = grid.spacing[0]
        assert placement_of(grid, Singularity(CENTER, 1.0)) is Placement.INTERIOR
        assert placement_of(
            grid, Singularity((0.0, 0.5, 0.5), 1.0)
        ) is Placement.BOUNDARY
        near_face = (1.0 - 0.4 * h, 0.5, 0.5)  # within half a cell of a face
        assert placement_of(
            grid, Singularity(near_face, 1.0)
        ) is Placement.BOUNDARY


class TestSingularWeight:
    def test_far_node_uses_point_value(self):
        grid = DomainGrid(UNIT3, (9,) * 3)
        sing = Singularity(CENTER, 1.0)
        w = singular_weight(grid, sing)
        x = np.array([grid.axis_nodes(k)[1] for k in range(3)])
        r = math.sqrt(float(np.sum((x - 0.5) ** 2)))
        assert w[1, 1, 1] == pytest.approx(1.0 / r, rel=1e-14)

    def test_singular_node_uses_cell_average(self):
        grid = DomainGrid(UNIT3, (9,) * 3)
        sing = Singularity(CENTER, 1.0)
        w = singular_weight(grid, sing)
        assert np.all(np.isfinite(w))
        h = grid.spacing[0]
        box = tuple((0.5 - h / 2.0, 0.5 + h / 2.0) for _ in range(3))
        ref = integrate_box(
            lambda pts: np.sum((pts - 0.5) ** 2, axis=1) ** -0.5, box, 64
        ) / h**3
        assert w[4, 4, 4] == pytest.approx(ref, rel=5e-3)

    def test_total_weighted_volume_matches_continuum(self):
        grid = DomainGrid(UNIT3, (17,) * 3)
        sing = Singularity(CENTER, 1.0)
        total = float(np.sum(singular_weight(grid, sing) * node_volumes(grid)))
        cont = integrate_box(
            lambda pts: np.sum((pts - 0.5) ** 2, axis=1) ** -0.5, UNIT3, 192
        )
        assert total == pytest.approx(cont, rel=0.01)


class TestEnergyAndGradient:
    def test_zero_field_has_zero_energy(self):
        cfg = unit_config()
        assert energy(np.zeros(cfg.grid.shape), cfg) == 0.0

    def test_constant_field_closed_form(self):
        cfg = unit_config(nodes=9, lam=0.7)
        vol = node_volumes(cfg.grid)
        masses = [
            float(np.sum(singular_weight(cfg.grid, s) * vol))
            for s in cfg.singularities
        ]
        for c in (0.3, 1.0, 2.5):
            u = np.full(cfg.grid.shape, c)
            expected = 0.5 * cfg.lam * cfg.grid.volume * c * c - sum(
                m / q * c**q for m, q in zip(masses, cfg.exponents())
            )
            assert energy(u, cfg) == pytest.approx(expected, rel=1e-12)

    def test_constant_field_gradient_is_pointwise(self):
        cfg = unit_config(nodes=9, lam=0.7)
        c = 0.8
        u = np.full(cfg.grid.shape, c)
        g = gradient(u, cfg)
        vol = node_volumes(cfg.grid)
        w = singular_weight(cfg.grid, cfg.singularities[0])
        q = cfg.exponents()[0]
        expected = (cfg.lam * c - w * c ** (q - 1.0)) * vol
        assert np.allclose(g, expected, rtol=1e-12, atol=1e-15)

    def test_gradient_matches_directional_derivative(self):
        cfg = unit_config(nodes=8, lam=0.5)
        rng = np.random.default_rng(7)
        for _ in range(20):
            u = 0.6 + 0.3 * rng.standard_normal(cfg.grid.shape)
            phi = rng.standard_normal(cfg.grid.shape)
            g = gradient(u, cfg)
            analytic = float(np.sum(g * phi))
            h = 1e-6
            fd = (energy(u + h * phi, cfg) - energy(u - h * phi, cfg)) / (2 * h)
            assert fd == pytest.approx(analytic, rel=1e-5, abs=1e-12)

    def test_shape_mismatch(self):
        cfg = unit_config()
        with pytest.raises(ShapeMismatch):
            energy(np.zeros((3, 3, 3)), cfg)
        with pytest.raises(ShapeMismatch):
            gradient(np.zeros((9, 9)), cfg)


class TestNehariScale:
    def test_constant_closed_form(self):
        cfg = unit_config(nodes=9, lam=1.0)
        u = np.ones(cfg.grid.shape)
        vol = node_volumes(cfg.grid)
        mass = float(np.sum(singular_weight(cfg.grid, cfg.singularities[0]) * vol))
        q = cfg.exponents()[0]
        expected = (cfg.lam * cfg.grid.volume / mass) ** (1.0 / (q - 2.0))
        assert nehari_scale(u, cfg) == pytest.approx(expected, rel=1e-12)

    def test_scaled_field_is_stationary_along_ray(self):
        cfg = unit_config(nodes=9, lam=1.0)
        u = bubble_field(cfg.grid, CENTER, 0.05, 1.0)
        t = nehari_scale(u, cfg)
        v = t * u
        # <grad E(v), v> = 0 on the natural constraint manifold
        g = gradient(v, cfg)
        pairing = float(np.sum(g * v))
        scale = abs(float(np.sum(np.abs(g * v))))
        assert abs(pairing) <= 1e-8 * max(scale, 1.0)

    def test_scan_confirms_ray_maximum(self):
        cfg = unit_config(nodes=9, lam=1.0)
        u = bubble_field(cfg.grid, CENTER, 0.05, 1.0)
        t_star = nehari_scale(u, cfg)
        ts = np.linspace(0.2 * t_star, 3.0 * t_star, 2001)
        vals = [energy(t * u, cfg) for t in ts]
        k = int(np.argmax(vals))
        assert ts[k] == pytest.approx(t_star, rel=2e-3)

    def test_mixed_exponents_newton(self):
        sites = (
            Singularity((0.3, 0.5, 0.5), 0.5),
            Singularity((0.7, 0.5, 0.5), 1.5),
        )
        cfg = unit_config(nodes=9, lam=1.0, sites=sites)
        u = 0.5 + bubble_field(cfg.grid, (0.3, 0.5, 0.5), 0.1, 0.5)
        t_star = nehari_scale(u, cfg)
        ts = np.linspace(0.2 * t_star, 3.0 * t_star, 4001)
        vals = [energy(t * u, cfg) for t in ts]
        k = int(np.argmax(vals))
        assert ts[k] == pytest.approx(t_star, rel=2e-3)
        v = t_star * u
        assert float(np.sum(gradient(v, cfg) * v)) == pytest.approx(0.0, abs=1e-7)

    def test_nonpositive_field_rejected(self):
        cfg = unit_config()
        with pytest.raises(NonpositivePart):
            nehari_scale(-np.ones(cfg.grid.shape), cfg)


class TestSolver:
    def test_small_solve_reaches_ground_state(self):
        cfg = unit_config(nodes=16, lam=0.01)
        report, u = mountain_pass_solve(
            cfg, Constant(1.0), SolveOptions(grad_tol=1e-7)
        )
        assert report.converged is True
        assert report.residual_sup < 1e-7
        assert report.min_value > 0.0
        assert report.below_threshold is True
        assert report.energy < report.threshold
        assert u.shape == cfg.grid.shape
        assert positivity_check(u).positive is True

    def test_energy_never_increases_with_more_iterations(self):
        cfg = unit_config(nodes=9, lam=0.01)
        energies = []
        for k in range(1, 7):
            report, _ = mountain_pass_solve(
                cfg, Constant(1.0),
                SolveOptions(max_iters=k, grad_tol=1e-14),
            )
            energies.append(report.energy)
        for a, b in zip(energies, energies[1:]):
            assert b <= a + 1e-12

    def test_threshold_uses_site_placement(self):
        boundary_cfg = unit_config(
            nodes=9, lam=0.01, sites=(Singularity((0.0, 0.5, 0.5), 1.0),)
        )
        interior_cfg = unit_config(nodes=9, lam=0.01)
        opts = SolveOptions(max_iters=1, grad_tol=1e-14)
        rb, _ = mountain_pass_solve(boundary_cfg, Constant(1.0), opts)
        ri, _ = mountain_pass_solve(interior_cfg, Constant(1.0), opts)
        assert ri.threshold == pytest.approx(2.0 * math.pi / 3.0, rel=1e-9)
        assert rb.threshold == pytest.approx(math.pi / 3.0, rel=1e-9)

    def test_identity_metric_agrees_with_default(self):
        cfg = unit_config(nodes=9, lam=0.01)
        r1, _ = mountain_pass_solve(
            cfg, Constant(1.0), SolveOptions(grad_tol=1e-6, metric="h1")
        )
        r2, _ = mountain_pass_solve(
            cfg, Constant(1.0),
            SolveOptions(grad_tol=1e-6, metric="l2", max_iters=50000),
        )
        assert r1.converged and r2.converged
        assert r1.energy == pytest.approx(r2.energy, rel=1e-6)

    def test_resolution_refinement_is_contracting(self):
        vals = []
        for n in (16, 24, 32):
            cfg = unit_config(nodes=n, lam=0.01)
            report, _ = mountain_pass_solve(
                cfg, Constant(1.0), SolveOptions(grad_tol=1e-8)
            )
            assert report.converged
            vals.append(report.energy)
        assert abs(vals[2] - vals[1]) < abs(vals[1] - vals[0])

    def test_default_init_is_bubble_at_weakest_site(self):
        cfg = unit_config(nodes=12, lam=0.01)
        r_default, u_default = mountain_pass_solve(
            cfg, None, SolveOptions(max_iters=1, grad_tol=1e-14)
        )
        r_explicit, u_explicit = mountain_pass_solve(
            cfg, BubbleAt(), SolveOptions(max_iters=1, grad_tol=1e-14)
        )
        assert np.array_equal(u_default, u_explicit)
        assert r_default.energy == r_explicit.energy

    def test_custom_init_roundtrip(self):
        cfg = unit_config(nodes=9, lam=0.01)
        seed = np.full(cfg.grid.shape, 2.0)
        report, _ = mountain_pass_solve(
            cfg, Custom(seed), SolveOptions(max_iters=1, grad_tol=1e-14)
        )
        assert math.isfinite(report.energy)

    def test_nonpositive_lambda_rejected(self):
        cfg = unit_config(nodes=9, lam=0.0)
        with pytest.raises(NonpositiveLambda):
            mountain_pass_solve(cfg, Constant(1.0))

    def test_report_consistency_enforced(self):
        with pytest.raises(ValueError):
            SolveReport(
                energy=1.0, residual_sup=0.0, min_value=0.1, iterations=1,
                threshold=2.0, below_threshold=False, converged=True,
            )


class TestScalingLaws:
    def test_constant_peak_scale_tracks_box_dilation(self):
        # doubling the box and dividing lambda by 4 multiplies the
        # constant-path maximiser by (lam' V' / C1')^(1/(q-2)) -> 2^(-1/2)
        small = unit_config(nodes=17, lam=1.0)
        big_grid = DomainGrid(((0.0, 2.0),) * 3, (17,) * 3)
        big = ProblemConfig(
            big_grid, 0.25, (Singularity((1.0, 1.0, 1.0), 1.0),)
        )
        c_small = nehari_scale(np.ones(small.grid.shape), small)
        c_big = nehari_scale(np.ones(big.grid.shape), big)
        assert c_big / c_small == pytest.approx(2.0**-0.5, rel=0.02)


class TestNegativeLambdaSanity:
    def test_zero_and_negative_lambda(self):
        for lam in (0.0, -1.0):
            cfg = unit_config(nodes=9, lam=lam)
            assert negative_lambda_sanity(cfg, (0.1, 1.0, 10.0)) is True

    def test_positive_lambda_rejected(self):
        with pytest.raises(PositiveLambda):
            negative_lambda_sanity(unit_config(lam=1.0), (1.0,))

    def test_bad_samples_rejected(self):
        cfg = unit_config(lam=0.0)
        with pytest.raises(ValueError):
            negative_lambda_sanity(cfg, ())
        with pytest.raises(ValueError):
            negative_lambda_sanity(cfg, (1.0, -2.0))


class TestSnapshots:
    def test_roundtrip(self, tmp_path):
        grid = DomainGrid(((0.0, 2.0), (-1.0, 1.0)), (9, 12))
        values = np.arange(9 * 12, dtype=float).reshape(9, 12) / 7.0
        path = tmp_path / "field.bin"
        save_field(path, grid, values)
        loaded_grid, loaded = load_field(path)
        assert loaded_grid == grid
        assert np.array_equal(loaded, values)

    def test_truncated_file_rejected(self, tmp_path):
        grid = DomainGrid(UNIT3, (9,) * 3)
        path = tmp_path / "field.bin"
        save_field(path, grid, np.ones(grid.shape))
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 16])
        with pytest.raises(ValueError):
            load_field(path)

    def test_garbage_header_rejected(self, tmp_path):
        path = tmp_path / "field.bin"
        path.write_bytes(b"\x00" * 24)
        with pytest.raises(ValueError):
            load_field(path)


class TestCrossModuleBubbleEnergy:
    def test_discrete_energy_matches_radial_quadrature(self):
        # an interior concentration site sees two half-space contributions,
        # so the reference energy doubles every flat half-space entry of the
        # radial breakdown:  (1/2)(2 K0e + lam * 2 L2e) - (1/q)(2 K1e)
        p = HSParams(3, 1.0)
        eps, delta, lam = 0.025, 0.25, 1.0
        b = bubble_energies(
            eps,
            BoundaryGeometry((0.0, 0.0), delta),
            CutoffSpec(delta),
            [],
            p,
        )
        q = p.two_star
        reference = 0.5 * (2.0 * b.grad_energy + lam * 2.0 * b.l2_mass) - (
            2.0 / q
        ) * b.near_mass

        grid = DomainGrid(UNIT3, (64,) * 3)
        cfg = ProblemConfig(grid, lam, (Singularity(CENTER, 1.0),))
        r = np.sqrt(
            sum(
                (grid.axis_nodes(k).reshape([-1 if j == k else 1 for j in range(3)])
                 - 0.5) ** 2
                for k in range(3)
            )
        )
        u = CutoffSpec(delta).value(r) * bubble_field(grid, CENTER, eps, 1.0)
        discrete = energy(u, cfg)
        assert discrete == pytest.approx(reference, rel=0.02)
