import jax
import jax.numpy as jnp
import numpy as np

import unittest
from wblab import *


class TestEigenvalues(unittest.TestCase):
    def test_examples(self):
        params = VfpParams(u=0.0, kappa=1.0)
        self.assertAlmostEqual(vfp_eigenvalue(4, +1, params), 2.0, places=14)
        self.assertAlmostEqual(vfp_eigenvalue(4, -1, params), -2.0, places=14)
        params = VfpParams(u=3.0, kappa=1.0)
        self.assertEqual(vfp_eigenvalue(0, +1, params), 0.0)
        self.assertEqual(vfp_eigenvalue(0, -1, params), -3.0)

    def test_vieta(self):
        for u, kappa in ((0.5, 1.0), (-1.3, 0.2), (4.0, 3.0)):
            params = VfpParams(u=u, kappa=kappa)
            for n in range(1, 12):
                product = vfp_eigenvalue(n, +1, params) * vfp_eigenvalue(n, -1, params)
                self.assertAlmostEqual(product, -n / kappa, places=10)

    def test_ordering(self):
        for u in (0.7, -0.7):
            basis = VfpBasis.build(VfpParams(u=u, kappa=0.5, n_modes=6))
            self.assertTrue(bool(jnp.all(jnp.diff(basis.mu_plus) > 0)))
            self.assertTrue(bool(jnp.all(jnp.diff(basis.mu_minus) < 0)))
            self.assertLess(float(basis.mu_minus[0]), min(basis.mu0))
            self.assertLessEqual(min(basis.mu0), 0.0)
            self.assertGreaterEqual(max(basis.mu0), 0.0)
            self.assertLess(max(basis.mu0), float(basis.mu_plus[0]))
        basis = VfpBasis.build(VfpParams(u=0.0, kappa=0.5))
        self.assertEqual(basis.mu0, (0.0, 0.0))

    def test_small_drift_limit(self):
        small, zero = VfpParams(u=1e-6, kappa=2.0), VfpParams(u=0.0, kappa=2.0)
        for n in range(1, 8):
            for sign in (+1, -1):
                self.assertAlmostEqual(vfp_eigenvalue(n, sign, small), sign * (n / 2.0) ** 0.5, delta=1e-5)
                mu = vfp_eigenvalue(n, sign, zero)
                v = jnp.linspace(-3.0, 3.0, 7)
                limit = v / 2.0 - sign * (2.0 * n) ** 0.5
                self.assertTrue(jnp.allclose(translated_velocity(v, mu, zero), limit, atol=1e-12))
                diff = translated_velocity(v, vfp_eigenvalue(n, sign, small), small) - limit
                self.assertLess(float(jnp.max(jnp.abs(diff))), 1e-5)

    def test_invalid(self):
        with self.assertRaises(InvalidInputError):
            VfpParams(u=0.0, kappa=0.0)
        with self.assertRaises(InvalidInputError):
            vfp_eigenvalue(-1, +1, VfpParams(u=0.0, kappa=1.0))
        with self.assertRaises(InvalidInputError):
            vfp_eigenvalue(1, 0, VfpParams(u=0.0, kappa=1.0))


class TestModes(unittest.TestCase):
    def test_diffusion_modes_at_rest(self):
        params = VfpParams(u=0.0, kappa=1.5)
        x = jnp.array([0.0, 0.3, 2.0])
        v = jnp.array([-1.0, 0.5, 2.0])
        maxwell = jnp.exp(-v ** 2 / 3.0)
        self.assertTrue(jnp.allclose(vfp_mode(0, +1, x, v, params), maxwell, atol=1e-15))
        self.assertTrue(jnp.allclose(vfp_mode(0, -1, x, v, params), maxwell, atol=1e-15))

    def test_hermite_zero(self):
        params = VfpParams(u=0.0, kappa=1.0)
        # ṽ+1 = (v - 2)/sqrt(2) vanishes at v = 2
        self.assertAlmostEqual(float(vfp_mode(1, +1, 0.0, 2.0, params)), 0.0, places=15)

    def test_stationary_residual(self):
        params = VfpParams(u=0.5, kappa=1.0)
        x, v = jnp.meshgrid(jnp.linspace(0.0, 1.0, 5), jnp.linspace(-3.0, 3.0, 13))
        for n in range(0, 11):
            for sign in (+1, -1):
                self.assertLessEqual(stationary_residual(n, sign, params, x, v), 1e-8)


class TestDecomposition(unittest.TestCase):
    def setUp(self):
        self.grid = gauss_hermite_grid(32, 1.0)
        self.v = self.grid.velocities
        self.pos = self.v > 0

    def test_single_mode(self):
        params = VfpParams(u=0.5, kappa=1.0, n_modes=3)
        data = vfp_mode(3, +1, jnp.where(self.pos, 0.0, 1.0), self.v, params)
        dec = half_range_decompose(data[self.pos], data[~self.pos], VfpBasis.build(params), 1.0, self.grid)
        self.assertAlmostEqual(float(dec.a[2]), 1.0, places=8)
        self.assertLessEqual(float(jnp.max(jnp.abs(dec.a[:2]))), 1e-8)
        self.assertLessEqual(float(jnp.max(jnp.abs(dec.b))), 1e-8)
        self.assertLessEqual(max(abs(dec.alpha), abs(dec.beta)), 1e-8)
        self.assertLessEqual(dec.residual, 1e-8)

    def test_maxwellian(self):
        params = VfpParams(u=0.0, kappa=1.0, n_modes=3)
        data = jnp.exp(-self.v ** 2 / 2.0)
        dec = half_range_decompose(data[self.pos], data[~self.pos], VfpBasis.build(params), 1.0, self.grid)
        self.assertAlmostEqual(dec.alpha, 1.0, places=8)
        x = jnp.linspace(0.0, 1.0, 5)[:, None]
        v = jnp.linspace(-2.0, 2.0, 9)[None, :]
        f = reconstruct(dec, x, v)
        self.assertLessEqual(float(jnp.max(jnp.abs(f - jnp.exp(-v ** 2 / 2.0)))), 1e-8)
        self.assertLessEqual(float(jnp.max(jnp.abs(reconstruct(dec, x, v, part="knudsen")))), 1e-8)

    def test_zero_data(self):
        params = VfpParams(u=0.3, kappa=1.0, n_modes=3)
        n_pos = int(jnp.sum(self.pos))
        dec = half_range_decompose(jnp.zeros(n_pos), jnp.zeros(32 - n_pos), VfpBasis.build(params), 1.0, self.grid)
        self.assertEqual(float(jnp.max(jnp.abs(dec.a))), 0.0)
        self.assertEqual(float(jnp.max(jnp.abs(dec.b))), 0.0)
        self.assertEqual(dec.alpha, 0.0)

    def test_too_many_modes(self):
        params = VfpParams(u=0.3, kappa=1.0, n_modes=16)
        with self.assertRaises(TruncationError):
            half_range_decompose(jnp.zeros(16), jnp.zeros(16), VfpBasis.build(params), 1.0, self.grid)

    def test_bad_part(self):
        params = VfpParams(u=0.3, kappa=1.0, n_modes=2)
        dec = half_range_decompose(jnp.ones(16), jnp.ones(16), VfpBasis.build(params), 1.0, self.grid)
        with self.assertRaises(InvalidInputError):
            reconstruct(dec, 0.0, 0.0, part="boundary")


class TestScattering(unittest.TestCase):
    def test_equilibrium_is_fixed(self):
        grid = gauss_hermite_grid(32, 1.0)
        s = scattering_matrix(VfpParams(0.0, 1.0, 3), 0.5, grid)
        maxwell = jnp.exp(-grid.velocities ** 2 / 2.0)
        self.assertLessEqual(float(jnp.max(jnp.abs(s.matrix @ maxwell - maxwell))), 1e-8)
        self.assertLessEqual(s.condition, 1e12)
        self.assertEqual(s.matrix.shape, (32, 32))

    def test_invalid_length(self):
        with self.assertRaises(InvalidInputError):
            scattering_matrix(VfpParams(0.0, 1.0, 3), 0.0)

    def test_layer_map_is_nonnegative_and_keeps_equilibrium(self):
        grid = gauss_hermite_grid(16, 1.0)
        for u in (0.0, 0.3):
            with self.subTest(u=u):
                s = layer_scattering_matrix(u, 1.0, 0.2, grid)
                self.assertEqual(s.matrix.shape, (16, 16))
                self.assertGreaterEqual(s.min_entry, -1e-12)
                maxwell = jnp.exp(-(grid.velocities - u) ** 2 / 2.0)
                self.assertLessEqual(float(jnp.max(jnp.abs(s.matrix @ maxwell - maxwell))), 1e-9)

    def test_layer_map_carries_current_across(self):
        grid = gauss_hermite_grid(16, 1.0)
        s = layer_scattering_matrix(0.3, 1.0, 0.5, grid)
        incoming = jax.random.uniform(jax.random.PRNGKey(0), (16,))
        outgoing = s.matrix @ incoming
        flux = grid.weights * grid.velocities
        left = float(jnp.sum(flux[:8] * outgoing[:8]) + jnp.sum(flux[8:] * incoming[8:]))
        right = float(jnp.sum(flux[:8] * incoming[:8]) + jnp.sum(flux[8:] * outgoing[8:]))
        self.assertAlmostEqual(left, right, delta=1e-9 * max(abs(right), 1.0))

    def test_layer_map_invalid(self):
        grid = gauss_hermite_grid(16, 1.0)
        with self.assertRaises(InvalidInputError):
            layer_scattering_matrix(0.0, 1.0, 0.0, grid)
        with self.assertRaises(InvalidInputError):
            layer_scattering_matrix(0.0, -1.0, 0.1)
        with self.assertRaises(InvalidInputError):
            layer_scattering_matrix(0.0, 2.0, 0.1, grid)


class TestFokkerPlanck(unittest.TestCase):
    def test_velocity_grid(self):
        grid = gauss_hermite_grid(32, 2.0)
        mass = float(jnp.sum(grid.weights * jnp.exp(-grid.velocities ** 2 / 4.0)))
        self.assertAlmostEqual(mass, (4.0 * jnp.pi) ** 0.5, places=12)
        self.assertTrue(jnp.allclose(grid.hermite.T @ grid.hermite, jnp.eye(32), atol=1e-12))
        with self.assertRaises(InvalidInputError):
            gauss_hermite_grid(7)

    def test_moment_rates(self):
        grid = gauss_hermite_grid(32, 1.0)
        f = 2.0 * jnp.exp(-(grid.velocities - 0.3) ** 2 / 2.0) / jnp.sqrt(2.0 * jnp.pi)
        rho, current = moments(f, grid)
        self.assertAlmostEqual(float(rho), 2.0, places=12)
        self.assertAlmostEqual(float(current), 0.6, places=12)
        rate = from_hermite(fokker_planck_matrix(0.0, grid) @ to_hermite(f, grid), grid)
        d_rho, d_current = moments(rate, grid)
        self.assertAlmostEqual(float(d_rho), 0.0, places=12)
        self.assertAlmostEqual(float(d_current), -0.6, places=12)
        # a Maxwellian drifting with the frame is an equilibrium
        rate = from_hermite(fokker_planck_matrix(0.3, grid) @ to_hermite(f, grid), grid)
        self.assertLessEqual(float(jnp.max(jnp.abs(rate))), 1e-12)

    def test_batched_matrix(self):
        grid = gauss_hermite_grid(8, 1.0)
        self.assertEqual(fokker_planck_matrix(jnp.array([0.0, 0.5, 1.0]), grid).shape, (3, 8, 8))


class TestCoupling(unittest.TestCase):
    def setUp(self):
        self.x = periodic_cells(32)

    def test_maxwellian_moments(self):
        f = maxwellian_density(self.x, 1.5, drift=-0.2, kappa=1.0, n_ordinates=16)
        rho, current = f.moments()
        self.assertTrue(jnp.allclose(rho, 1.5, atol=1e-12))
        self.assertTrue(jnp.allclose(current, -0.3, atol=1e-12))
        self.assertAlmostEqual(f.total_mass(), 1.5, places=12)

    def test_no_particles_is_burgers(self):
        state = burgers_field(self.x, 0.5 + 0.5 * jnp.sin(2 * jnp.pi * self.x))
        f = maxwellian_density(self.x, 0.0, kappa=1.0, n_ordinates=16)
        dt = 0.5 * coupled_dt(state, f)
        coupled, f_new = burgers_vfp_step(state, f, 1.0, dt)
        alone = wb_godunov_step(state, burgers_law(), dt, cfl=1.0, boundary="periodic")
        self.assertTrue(jnp.allclose(coupled.u, alone.u, atol=1e-15))
        self.assertEqual(float(jnp.max(jnp.abs(f_new.values))), 0.0)

    def test_equilibrium_stays(self):
        for kinetic in ("split", "scattering"):
            with self.subTest(kinetic=kinetic):
                state = burgers_field(self.x, 0.0)
                f = maxwellian_density(self.x, 1.0, kappa=1.0, n_ordinates=16)
                dt = coupled_dt(state, f)
                for _ in range(5):
                    state, g = burgers_vfp_step(state, f, 1.0, dt, kinetic=kinetic)
                    self.assertLessEqual(float(jnp.max(jnp.abs(g.values - f.values))), 1e-10)
                    f = g
                self.assertLessEqual(float(jnp.max(jnp.abs(state.u))), 1e-12)

    def _generic(self, n_cells):
        x = periodic_cells(n_cells)
        state = burgers_field(x, 0.5 + 0.2 * jnp.sin(2 * jnp.pi * x))
        f = maxwellian_density(x, 1.0 + 0.2 * jnp.cos(2 * jnp.pi * x), kappa=1.0, n_ordinates=16)
        return state, f

    def test_momentum_exchange_split(self):
        state, f = self._generic(32)
        run = run_burgers_vfp(state, f, 1.0, t_end=0.1)
        self.assertAlmostEqual(run.time, 0.1, places=12)
        self.assertLessEqual(run.momentum_drift, 1e-8 * run.time)
        self.assertGreater(run.steps, 1)

    def test_momentum_exchange_scattering(self):
        for n_cells in (16, 32):
            with self.subTest(n_cells=n_cells):
                state, f = self._generic(n_cells)
                run = run_burgers_vfp(state, f, 1.0, t_end=0.05, kinetic="scattering")
                self.assertLessEqual(run.momentum_drift, 1e-8 * run.time)
                self.assertGreaterEqual(float(jnp.min(run.density.values)), 0.0)

    def test_drag_pulls_velocities_together(self):
        state, f = self._generic(32)
        run = run_burgers_vfp(state, f, 1.0, t_end=0.5)
        rho, current = run.density.moments()
        gap_before = float(jnp.mean(jnp.abs(state.u - f.moments()[1] / f.moments()[0])))
        gap_after = float(jnp.mean(jnp.abs(run.state.u - current / rho)))
        self.assertLess(gap_after, gap_before)

    def test_step_validation(self):
        state, f = self._generic(16)
        with self.assertRaises(InvalidInputError):
            burgers_vfp_step(state, f, 1.0, 1e-3, kinetic="exact")
        with self.assertRaises(InvalidInputError):
            burgers_vfp_step(state, f, 2.0, 1e-3)
        with self.assertRaises(StepRejectedError):
            burgers_vfp_step(state, f, 1.0, 1.0)


if __name__ == '__main__':
    unittest.main()
