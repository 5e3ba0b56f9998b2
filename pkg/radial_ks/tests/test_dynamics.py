import math

import numpy as np
from django.test import SimpleTestCase, tag

from radial_ks.chemo import reconstruct
from radial_ks.diagnostics import envelope_violations
from radial_ks.driver import Label
from radial_ks.dynamics import (
    PositivityLoss, SimConfig, SimState, Termination, TimestepUnderflow, advance, gradient, guarded_step,
    rhs_divergence, rhs_expanded, run, second_derivative, stable_dt, step, total_flux,
)
from radial_ks.grid import make_grid, mass
from radial_ks.initial_data import InitialDataSpec


def cosine_state(grid, amplitude=0.5, mass_target=None):
    u0 = InitialDataSpec(family='cosine', amplitude=amplitude, mass=mass_target).build(grid)
    return SimState.from_density(grid, 0.0, u0)


def interior_gap(grid, chi, exclude=2):
    state = cosine_state(grid, amplitude=0.2)
    gap = rhs_divergence(grid, state, chi) - rhs_expanded(grid, state, chi)
    return np.max(np.abs(gap[exclude:grid.N - exclude]))


class StencilTests(SimpleTestCase):

    def test_derivatives_of_a_cosine(self):
        grid = make_grid(1, 1.0, 256)
        u = np.cos(math.pi * grid.centers)
        np.testing.assert_allclose(gradient(grid, u), -math.pi * np.sin(math.pi * grid.centers), atol=1e-3)
        np.testing.assert_allclose(second_derivative(grid, u), -math.pi ** 2 * u, atol=1e-3)

    def test_gradient_converges_at_second_order(self):
        errors = []
        for N in (128, 256):
            grid = make_grid(2, 1.0, N)
            u = np.cos(math.pi * grid.centers)
            errors.append(np.max(np.abs(gradient(grid, u) + math.pi * np.sin(math.pi * grid.centers))))
        self.assertGreaterEqual(math.log2(errors[0] / errors[1]), 1.8)

    def test_gradient_of_a_single_raised_cell(self):
        grid = make_grid(1, 1.0, 4)
        h = 1e-3
        u_r = gradient(grid, np.array([1.0, 1.0 + h, 1.0, 1.0]))
        self.assertAlmostEqual(u_r[0], h / (2 * grid.dr), delta=1e-12)
        self.assertAlmostEqual(u_r[2], -h / (2 * grid.dr), delta=1e-12)
        self.assertEqual(u_r[1], 0.0)
        self.assertEqual(u_r[3], 0.0)

    def test_gradient_vanishes_for_constants(self):
        grid = make_grid(3, 1.0, 16)
        self.assertTrue(np.all(gradient(grid, np.full(16, 2.0)) == 0.0))
        self.assertTrue(np.all(second_derivative(grid, np.full(16, 2.0)) == 0.0))

    def test_total_flux_limits(self):
        self.assertEqual(float(total_flux(0.0, 0.0, 0.0, chi=1.0)), 0.0)
        # the diffusive part saturates at |u|
        self.assertAlmostEqual(float(total_flux(1.0, 1e8, 0.0, chi=1.0)), 1.0, places=6)
        self.assertAlmostEqual(float(total_flux(1.0, 0.0, 1.0, chi=2.0)), -2.0 / math.sqrt(2.0))


class RightHandSideTests(SimpleTestCase):

    def test_rates_telescope(self):
        for n in (1, 2, 3):
            grid = make_grid(n, 1.0, 128)
            state = cosine_state(grid, mass_target=5.0)
            rate = rhs_divergence(grid, state, chi=1.5)
            scale = np.sum(np.abs(rate) * grid.cell_measures)
            self.assertLess(abs(np.sum(rate * grid.cell_measures)), 1e-13 * scale)

    def test_forms_agree_with_second_order(self):
        for n in (1, 2, 3):
            coarse = interior_gap(make_grid(n, 1.0, 128), chi=0.5)
            fine = interior_gap(make_grid(n, 1.0, 256), chi=0.5)
            with self.subTest(n=n):
                self.assertGreaterEqual(math.log2(coarse / fine), 1.8)

    def test_steady_state_is_a_fixed_point(self):
        for n in (1, 2, 3):
            grid = make_grid(n, 1.0, 256)
            state = SimState.from_density(grid, 0.0, np.ones(256))
            for _ in range(1000):
                state = step(grid, state, 1.0, stable_dt(grid, state, 1.0, 0.4))
            with self.subTest(n=n):
                self.assertLessEqual(np.max(np.abs(state.u - 1.0)), 1e-12)


class SteppingTests(SimpleTestCase):

    def test_stable_dt_for_constant_density(self):
        grid = make_grid(2, 1.0, 64)
        state = SimState.from_density(grid, 0.0, np.ones(64))
        self.assertAlmostEqual(stable_dt(grid, state, 1.0, 0.4), 0.4 * grid.dr ** 2 / 2, delta=1e-15)

    def test_stable_dt_uses_the_chemotactic_speed(self):
        # coarse grid and strong drift, so the transport limit is the binding one
        grid = make_grid(1, 1.0, 8)
        state = cosine_state(grid, amplitude=0.8, mass_target=6.0)
        chi = 50.0
        u = state.u
        u_r = gradient(grid, u)
        vr = reconstruct(grid, u, chi).vr
        a1 = u ** 3 / np.hypot(u, u_r) ** 3
        w = chi * vr / np.sqrt(1.0 + vr ** 2)
        expected = 0.4 * min(grid.dr ** 2 / (2 * np.max(a1)), grid.dr / np.max(np.abs(w)))
        self.assertAlmostEqual(stable_dt(grid, state, chi, 0.4), expected, delta=1e-12 * expected)

    def test_midpoint_steps_are_second_order_in_time(self):
        grid = make_grid(1, 1.0, 32)
        start = cosine_state(grid)
        t_end = 0.05
        finals = []
        for steps in (400, 800, 1600):
            state = start
            for _ in range(steps):
                state = step(grid, state, 0.5, t_end / steps)
            finals.append(state.u)
        coarse = np.max(np.abs(finals[0] - finals[1]))
        fine = np.max(np.abs(finals[1] - finals[2]))
        order = math.log2(coarse / fine)
        self.assertGreaterEqual(order, 1.8)
        self.assertLessEqual(order, 2.3)

    def test_dt_underflow(self):
        grid = make_grid(1, 1.0, 64)
        with self.assertRaises(TimestepUnderflow):
            stable_dt(grid, cosine_state(grid), 1.0, 0.4, dt_min=1.0)

    def test_oversized_step_loses_positivity(self):
        grid = make_grid(1, 1.0, 32)
        with self.assertRaises(PositivityLoss):
            guarded_step(grid, cosine_state(grid), 1.0, dt=1e3, max_retries=0)

    def test_guarded_step_accepts_a_stable_step(self):
        grid = make_grid(2, 1.0, 32)
        state = cosine_state(grid)
        dt = stable_dt(grid, state, 0.5, 0.4)
        new_state, taken, attempts = guarded_step(grid, state, 0.5, dt)
        self.assertEqual(attempts, 0)
        self.assertEqual(taken, dt)
        self.assertAlmostEqual(new_state.t, dt)

    def test_advance_lands_on_the_target_time(self):
        grid = make_grid(1, 1.0, 32)
        state = advance(grid, cosine_state(grid), 0.5, 0.0123, 0.4)
        self.assertEqual(state.t, 0.0123)

    def test_mass_is_conserved_over_short_runs(self):
        grid = make_grid(2, 1.0, 64)
        state = cosine_state(grid, mass_target=3.0)
        for _ in range(500):
            state = step(grid, state, 0.5, stable_dt(grid, state, 0.5, 0.4))
        self.assertLessEqual(abs(mass(grid, state.u) - 3.0) / 3.0, 1e-12)


class RunTests(SimpleTestCase):

    def test_short_bounded_run(self):
        config = SimConfig(n=2, R=1.0, N=32, chi=0.5, u0=InitialDataSpec(amplitude=0.5),
                           t_end=0.2, sample_stride=50)
        result = run(config)
        self.assertEqual(result.termination, Termination.T_END)
        self.assertEqual(result.classification.label, Label.GLOBAL_BOUNDED)
        self.assertEqual(result.records[0].t, 0.0)
        self.assertAlmostEqual(result.records[-1].t, 0.2, delta=1e-12)
        self.assertEqual(result.final_state.t, result.records[-1].t)
        self.assertEqual(envelope_violations(result.records), [])
        masses = [r.mass for r in result.records]
        self.assertLessEqual(max(abs(m - masses[0]) for m in masses) / masses[0], 1e-10)

    def test_pure_diffusion_never_raises_the_maximum(self):
        config = SimConfig(n=2, R=1.0, N=32, chi=0.0, u0=InitialDataSpec(amplitude=0.5),
                           t_end=0.5, sample_stride=10)
        result = run(config)
        self.assertEqual(result.termination, Termination.T_END)
        self.assertEqual(result.classification.label, Label.GLOBAL_BOUNDED)
        peaks = [r.max_u for r in result.records]
        for earlier, later in zip(peaks, peaks[1:]):
            self.assertLessEqual(later, earlier + 1e-12)
        self.assertLess(peaks[-1], peaks[0])

    def test_threshold_crossing_ends_the_run(self):
        config = SimConfig(n=1, R=1.0, N=32, chi=2.0, u0=InitialDataSpec(mass=20.0, amplitude=0.5),
                           t_end=1.0, blowup_factor=1.01)
        result = run(config)
        self.assertEqual(result.termination, Termination.BLOWUP_THRESHOLD)
        self.assertEqual(result.classification.label, Label.GROWTH_SUSPECTED)
        self.assertGreater(result.records[-1].max_u, 1.01 * result.max_u0)
        self.assertLess(result.final_state.t, 1.0)

    @tag('slow')
    def test_mass_conservation_over_ten_thousand_steps(self):
        grid = make_grid(2, 1.0, 256)
        state = cosine_state(grid)
        initial = mass(grid, state.u)
        for _ in range(10_000):
            state = step(grid, state, 0.5, stable_dt(grid, state, 0.5, 0.4))
        self.assertLessEqual(abs(mass(grid, state.u) - initial) / initial, 1e-10)

    @tag('slow')
    def test_lower_envelope_holds(self):
        config = SimConfig(n=2, R=1.0, N=64, chi=0.5, u0=InitialDataSpec(amplitude=0.5),
                           t_end=5.0, sample_stride=500)
        result = run(config)
        self.assertEqual(result.termination, Termination.T_END)
        self.assertEqual(envelope_violations(result.records), [])
        for r in result.records:
            self.assertLessEqual(r.chem_bound_excess, 1e-12 * r.max_u)
