import math

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from radial_ks.grid import make_grid, mass, sphere_measure
from radial_ks.initial_data import InitialDataSpec, initial_data_from_dict


class RadialGridTests(SimpleTestCase):

    def test_sphere_measure(self):
        self.assertEqual(sphere_measure(1), 2.0)
        self.assertAlmostEqual(sphere_measure(2), 2 * math.pi)
        self.assertAlmostEqual(sphere_measure(3), 4 * math.pi)
        self.assertAlmostEqual(sphere_measure(4), 2 * math.pi ** 2)

    def test_cell_measures_add_up_to_the_ball(self):
        for n in (1, 2, 3):
            grid = make_grid(n, 2.0, 100)
            self.assertAlmostEqual(np.sum(grid.cell_measures) / grid.volume, 1.0, delta=1e-13)
            self.assertTrue(np.all(grid.cell_measures > 0))

    def test_faces_and_centers(self):
        grid = make_grid(2, 1.0, 8)
        self.assertEqual(grid.faces[0], 0.0)
        self.assertEqual(grid.faces[-1], 1.0)
        self.assertEqual(len(grid.centers), 8)
        self.assertAlmostEqual(grid.centers[0], grid.dr / 2)
        self.assertGreater(grid.centers.min(), 0.0)

    def test_arrays_are_read_only(self):
        grid = make_grid(1, 1.0, 4)
        with self.assertRaises(ValueError):
            grid.centers[0] = 1.0

    def test_mass_of_constant(self):
        for n in (1, 2, 3):
            grid = make_grid(n, 1.5, 64)
            self.assertAlmostEqual(mass(grid, np.full(64, 3.0)), 3.0 * grid.volume, delta=1e-12)

    def test_invalid_parameters(self):
        for args in ((0, 1.0, 10), (2, 0.0, 10), (2, -1.0, 10), (2, 1.0, 1), (2, float('inf'), 10)):
            with self.subTest(args=args), self.assertRaises(ValidationError):
                make_grid(*args)

    def test_field_length_is_checked(self):
        grid = make_grid(1, 1.0, 10)
        with self.assertRaises(ValidationError):
            mass(grid, np.ones(11))


class InitialDataTests(SimpleTestCase):

    def test_cosine_hits_the_target_mass(self):
        for n in (1, 2, 3):
            grid = make_grid(n, 1.0, 128)
            u0 = InitialDataSpec(family='cosine', mass=2.5, amplitude=0.4).build(grid)
            self.assertAlmostEqual(mass(grid, u0), 2.5, delta=1e-12)
            self.assertGreater(u0.min(), 0.0)

    def test_bump_hits_the_target_mass(self):
        grid = make_grid(2, 1.0, 128)
        u0 = InitialDataSpec(family='bump', mass=10.0, amplitude=0.2, k=3).build(grid)
        self.assertAlmostEqual(mass(grid, u0), 10.0, delta=1e-11)
        self.assertEqual(np.argmax(u0), 0)

    def test_bump_without_room_for_the_base_level(self):
        grid = make_grid(1, 1.0, 64)
        with self.assertRaises(ValidationError):
            InitialDataSpec(family='bump', mass=0.01, amplitude=1.0).build(grid)

    def test_invalid_specs(self):
        for kwargs in ({'family': 'gauss'}, {'amplitude': 1.0}, {'family': 'bump', 'k': 1},
                       {'mass': -1.0}, {'family': 'bump', 'amplitude': -0.1}):
            with self.subTest(kwargs=kwargs), self.assertRaises(ValidationError):
                InitialDataSpec(**kwargs)

    def test_from_dict_drops_unset_fields(self):
        spec = initial_data_from_dict({'family': 'bump', 'mass': None, 'k': 4})
        self.assertEqual(spec, InitialDataSpec(family='bump', k=4))

    def test_neumann_slopes_vanish(self):
        grid = make_grid(3, 2.0, 32)
        spec = InitialDataSpec(family='cosine', amplitude=0.7)
        slopes = spec.slope(grid, np.array([0.0, 2.0]))
        self.assertTrue(np.all(np.abs(slopes) < 1e-12))
