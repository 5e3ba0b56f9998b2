import math

import numpy as np
from django.test import SimpleTestCase

from radial_ks.chemo import (
    bound_violations, compute_mu, compute_vr, compute_vr_faces, compute_vrr, compute_vrt, reconstruct,
)
from radial_ks.dynamics import gradient
from radial_ks.grid import make_grid, mass
from radial_ks.initial_data import InitialDataSpec


def cosine_field(grid, amplitude=0.5, mass_target=None):
    return InitialDataSpec(family='cosine', amplitude=amplitude, mass=mass_target).build(grid)


class ChemoattractantTests(SimpleTestCase):

    def test_mu_is_mass_over_volume(self):
        grid = make_grid(2, 1.0, 64)
        u = cosine_field(grid, mass_target=3.0)
        self.assertAlmostEqual(compute_mu(grid, u), 3.0 / grid.volume, delta=1e-13)

    def test_constant_density_has_flat_chemoattractant(self):
        for n in (1, 2, 3):
            grid = make_grid(n, 1.0, 128)
            u = np.ones(128)
            fields = reconstruct(grid, u, chi=1.0)
            self.assertAlmostEqual(fields.mu, 1.0, delta=1e-15)
            self.assertLess(np.max(np.abs(fields.vr)), 1e-13)
            self.assertLess(np.max(np.abs(fields.vr_faces)), 1e-13)
            self.assertLess(np.max(np.abs(fields.vrr)), 1e-12)

    def test_vr_vanishes_at_both_ends(self):
        for n in (1, 2, 3):
            grid = make_grid(n, 1.0, 100)
            u = cosine_field(grid, amplitude=0.8, mass_target=5.0)
            faces = compute_vr_faces(grid, u, compute_mu(grid, u))
            self.assertEqual(faces[0], 0.0)
            self.assertLess(abs(faces[-1]), 1e-12 * u.max())

    def test_radial_laplacian_identity(self):
        # v_rr + (n-1)/r v_r = mu - u holds exactly for the discrete fields
        for n in (1, 2, 3):
            grid = make_grid(n, 1.0, 64)
            u = cosine_field(grid, amplitude=0.6)
            mu = compute_mu(grid, u)
            lhs = compute_vrr(grid, u, mu) + (n - 1) / grid.centers * compute_vr(grid, u, mu)
            np.testing.assert_allclose(lhs, mu - u, atol=1e-12)

    def test_vr_matches_the_exact_solution(self):
        # n = 1, u = 1 + a cos(pi r): v_r = -a sin(pi r) / pi
        grid = make_grid(1, 1.0, 256)
        a = 0.5
        u = 1.0 + a * np.cos(math.pi * grid.centers)
        vr = compute_vr(grid, u, compute_mu(grid, u))
        exact = -a * np.sin(math.pi * grid.centers) / math.pi
        self.assertLess(np.max(np.abs(vr - exact)), 1e-4)

    def test_linear_density_on_the_interval(self):
        # u = 2r: mu = 1, v_r = r - r^2, v_rr = 1 - 2r
        grid = make_grid(1, 1.0, 256)
        r = grid.centers
        u = 2.0 * r
        mu = compute_mu(grid, u)
        self.assertAlmostEqual(mu, 1.0, delta=1e-13)
        f = grid.faces
        np.testing.assert_allclose(compute_vr_faces(grid, u, mu), f - f ** 2, atol=1e-13)
        # the half cell below each center carries an O(dr^2) quadrature error
        np.testing.assert_allclose(compute_vr(grid, u, mu), r - r ** 2, atol=grid.dr ** 2)
        np.testing.assert_allclose(compute_vrr(grid, u, mu), 1.0 - 2.0 * r, atol=1e-12)

    def test_parabolic_density_on_the_disc(self):
        # u = 2(1 - r^2): mu = 1, v_r = -r/2 + r^3/2, v_rr = -1/2 + 3r^2/2
        grid = make_grid(2, 1.0, 512)
        r = grid.centers
        u = 2.0 * (1.0 - r ** 2)
        mu = compute_mu(grid, u)
        self.assertAlmostEqual(mu, 1.0, delta=1e-5)
        np.testing.assert_allclose(compute_vr(grid, u, mu), -r / 2 + r ** 3 / 2, atol=1e-5)
        np.testing.assert_allclose(compute_vrr(grid, u, mu), -0.5 + 1.5 * r ** 2, atol=1e-5)

    def test_vrt_formula(self):
        self.assertEqual(float(compute_vrt(1.0, 0.0, 0.0, chi=2.0)), 0.0)
        value = float(compute_vrt(1.0, 1.0, 1.0, chi=2.0))
        self.assertAlmostEqual(value, -1 / math.sqrt(2) + 2 / math.sqrt(2))
        self.assertEqual(float(compute_vrt(0.0, 0.0, 1.0, chi=1.0)), 0.0)

    def test_reconstruct_fills_vrt_only_with_gradient(self):
        grid = make_grid(2, 1.0, 32)
        u = cosine_field(grid)
        self.assertIsNone(reconstruct(grid, u, 1.0).vrt)
        self.assertEqual(reconstruct(grid, u, 1.0, u_r=gradient(grid, u)).vrt.shape, (32,))

    def test_pointwise_bounds_hold(self):
        for n in (1, 2, 3):
            for amplitude in (0.2, 0.9):
                grid = make_grid(n, 1.0, 128)
                u = cosine_field(grid, amplitude=amplitude, mass_target=4.0)
                excess = bound_violations(grid, u, reconstruct(grid, u, 1.0))
                with self.subTest(n=n, amplitude=amplitude):
                    for name, value in excess.items():
                        self.assertLessEqual(value, 1e-12 * u.max(), name)

    def test_one_dimensional_mass_bound_is_reported(self):
        grid = make_grid(1, 1.0, 32)
        u = cosine_field(grid)
        self.assertIn('vr_mass_bound', bound_violations(grid, u, reconstruct(grid, u, 1.0)))
        grid = make_grid(2, 1.0, 32)
        u = cosine_field(grid)
        self.assertNotIn('vr_mass_bound', bound_violations(grid, u, reconstruct(grid, u, 1.0)))

    def test_mass_is_shared_with_grid_quadrature(self):
        grid = make_grid(3, 1.0, 50)
        u = cosine_field(grid)
        total = mass(grid, u)
        self.assertAlmostEqual(compute_mu(grid, u) * float(np.sum(grid.cell_measures)), total, delta=1e-14 * total)
