import jax
import jax.numpy as jnp
import numpy as np

import unittest
from wblab import *


class TestMomentState(unittest.TestCase):
    def test_invariants_roundtrip(self):
        rng = np.random.default_rng(3)
        um = jnp.asarray(rng.uniform(-2.0, 2.0, 50))
        up = um + jnp.asarray(rng.uniform(0.0, 2.0, 50))
        state = MomentState.from_invariants(up, um)
        self.assertTrue(jnp.allclose(state.u_plus, up, atol=1e-14))
        self.assertTrue(jnp.allclose(state.u_minus, um, atol=1e-14))
        self.assertTrue(jnp.allclose(state.mach, 2.0 * state.velocity / state.rho))

    def test_doping_profile(self):
        rho_d = doping_profile(jnp.array([-0.9, -0.35, 0.0, 0.5]))
        self.assertTrue(jnp.allclose(rho_d, jnp.array([1.0, 0.6, 0.2, 1.0])))

    def test_config_validation(self):
        with self.assertRaises(InvalidConfigError):
            device_config(doping=1.5)
        with self.assertRaises(InvalidConfigError):
            device_config(bias=-0.1)
        with self.assertRaises(InvalidConfigError):
            device_config(debye=0.0)
        with self.assertRaises(InvalidConfigError):
            device_config(damping_tau=-1.0)


class TestFluxes(unittest.TestCase):
    def test_euler_flux(self):
        self.assertTrue(jnp.allclose(euler_flux(1.0, -1.0), jnp.array([0.0, 2.0 / 3.0])))
        self.assertTrue(jnp.allclose(euler_flux(1.0, 0.0), jnp.array([0.5, 1.0 / 3.0])))
        with self.assertRaises(InvalidInputError):
            euler_flux(-1.0, 1.0)

    def test_euler_flux_identity(self):
        rng = np.random.default_rng(0)
        um = jnp.asarray(rng.uniform(-3.0, 3.0, 1000))
        up = um + jnp.asarray(rng.uniform(0.0, 3.0, 1000))
        rho, u = up - um, 0.5 * (up + um)
        flux = euler_flux(up, um)
        self.assertTrue(jnp.allclose(flux[:, 0], rho * u, atol=1e-13))
        self.assertTrue(jnp.allclose(flux[:, 1], rho * u ** 2 + rho ** 3 / 12.0, atol=1e-13))

    def test_split_examples(self):
        f_plus, f_minus = split_flux(2.0, 1.0)
        self.assertTrue(jnp.allclose(f_plus, jnp.array([1.5, 7.0 / 3.0])))
        self.assertTrue(jnp.allclose(f_minus, 0.0))
        f_plus, f_minus = split_flux(-1.0, -2.0)
        self.assertTrue(jnp.allclose(f_plus, 0.0))
        self.assertTrue(jnp.allclose(f_minus, jnp.array([-1.5, 7.0 / 3.0])))
        f_plus, f_minus = split_flux(1.0, -1.0)
        self.assertTrue(jnp.allclose(f_plus, jnp.array([0.5, 1.0 / 3.0])))
        self.assertTrue(jnp.allclose(f_minus, jnp.array([-0.5, 1.0 / 3.0])))

    def test_split_identity(self):
        rng = np.random.default_rng(1)
        um = jnp.asarray(rng.uniform(-3.0, 3.0, 1000))
        up = um + jnp.asarray(rng.uniform(0.0, 3.0, 1000))
        f_plus, f_minus = split_flux(up, um)
        self.assertLessEqual(float(jnp.max(jnp.abs(f_plus + f_minus - euler_flux(up, um)))), 1e-13)

    def test_interface_flux_reduces_without_jump(self):
        rng = np.random.default_rng(2)
        um_l = jnp.asarray(rng.uniform(-3.0, 3.0, 1000))
        up_l = um_l + jnp.asarray(rng.uniform(0.0, 3.0, 1000))
        um_r = jnp.asarray(rng.uniform(-3.0, 3.0, 1000))
        up_r = um_r + jnp.asarray(rng.uniform(0.0, 3.0, 1000))
        big_plus, big_minus = wb_interface_flux((up_l, um_l), (up_r, um_r), 0.0)
        f_plus, _ = split_flux(up_l, um_l)
        _, f_minus = split_flux(up_r, um_r)
        self.assertLessEqual(float(jnp.max(jnp.abs(big_plus - f_plus))), 1e-14)
        self.assertLessEqual(float(jnp.max(jnp.abs(big_minus - f_minus))), 1e-14)

    def test_interface_consistency(self):
        big_plus, big_minus = wb_interface_flux((1.0, -1.0), (1.0, -1.0), 0.0)
        self.assertTrue(jnp.allclose(big_plus + big_minus, jnp.array([0.0, 2.0 / 3.0]), atol=1e-15))

    def test_strong_barrier_blocks(self):
        big_plus, _ = wb_interface_flux((1.0, 0.5), (1.0, 0.5), 10.0)
        self.assertTrue(jnp.allclose(big_plus, 0.0))

    def test_vacuum_right(self):
        big_plus, big_minus = wb_interface_flux((2.0, 1.0), (0.0, 0.0), 0.0)
        self.assertTrue(jnp.allclose(big_plus, jnp.array([1.5, 7.0 / 3.0])))
        self.assertTrue(jnp.allclose(big_minus, 0.0))

    def test_barrier_conserves_mass(self):
        # particles leaving the left cell either cross or are reflected back
        f_plus, _ = split_flux(1.5, 0.2)
        big_plus, _ = wb_interface_flux((1.5, 0.2), (3.0, 2.0), 0.4)
        _, big_minus = wb_interface_flux((1.5, 0.2), (3.0, 2.0), 0.4)
        self.assertAlmostEqual(float(big_plus[0] - big_minus[0]), float(f_plus[0]), places=14)

    def test_augmented_jump(self):
        self.assertEqual(float(augmented_jump(0.3, 1.0, 2.0, jnp.inf, 0.1)), 0.3)
        self.assertAlmostEqual(float(augmented_jump(0.3, 1.0, -1.0, 2.0, 0.1)), 0.3)
        self.assertAlmostEqual(float(augmented_jump(0.1, 1.0, 1.0, 2.0, 0.1)), 0.15)
        self.assertAlmostEqual(float(augmented_jump(0.1, 1.0, 1.0, 2.0, 0.1, literal=True)), 0.6)
        with self.assertRaises(InvalidConfigError):
            augmented_jump(0.1, 1.0, 1.0, 0.0, 0.1)


class TestPoisson(unittest.TestCase):
    def test_neutral(self):
        config = device_config(n_cells=64)
        potential = poisson_solve(config.doping, config)
        self.assertLessEqual(float(jnp.max(jnp.abs(potential.phi))), 1e-14)

    def test_linear_bias(self):
        config = device_config(n_cells=64, bias=0.5)
        potential = poisson_solve(config.doping, config)
        expected = -0.5 * (1.0 + config.x) / 2.0
        self.assertLessEqual(float(jnp.max(jnp.abs(potential.phi - expected))), 1e-12)
        self.assertEqual(potential.phi_right, -0.5)
        self.assertTrue(jnp.allclose(potential.e_field, 0.25, atol=1e-12))
        self.assertLessEqual(float(jnp.max(jnp.abs(poisson_residual(potential, config.doping, config)))), 1e-12)

    def test_manufactured_order(self):
        bias, lam = 0.3, 0.15

        def exact(x):
            return jnp.sin(jnp.pi * x) * (1.0 - x ** 2) - bias * (1.0 + x) / 2.0

        def second(x):
            s, c = jnp.sin(jnp.pi * x), jnp.cos(jnp.pi * x)
            return -jnp.pi ** 2 * (1.0 - x ** 2) * s - 4.0 * jnp.pi * x * c - 2.0 * s

        errors = []
        for n in (64, 128, 256):
            config = device_config(n_cells=n, bias=bias, debye=lam)
            rho = config.doping - lam * second(config.x)
            phi = poisson_solve(rho, config).phi
            errors.append(float(jnp.max(jnp.abs(phi - exact(config.x)))))
        for coarse, fine in zip(errors, errors[1:]):
            self.assertGreaterEqual(np.log2(coarse / fine), 1.9)

    def test_singular_system(self):
        config = device_config(n_cells=16)
        with self.assertRaises(InvalidConfigError):
            poisson_solve(config.doping, config.replace(debye=jnp.zeros(16)))


class TestDeviceScheme(unittest.TestCase):
    def test_rest_state_is_steady(self):
        config = device_config(n_cells=64, doping=1.0)
        state = rest_state(config)
        dt = stable_dt(state, config)
        for _ in range(100):
            state = device_step(state, config, dt)
        self.assertLessEqual(float(jnp.max(jnp.abs(state.rho - 1.0))), 1e-13)
        self.assertLessEqual(float(jnp.max(jnp.abs(state.momentum))), 1e-13)

    def test_mass_ledger(self):
        config = device_config(n_cells=64, bias=0.1)
        state = rest_state(config)
        run = device_run(state, config, t_end=0.2)
        self.assertAlmostEqual(run.time, 0.2, places=12)
        change = float(jnp.sum(run.state.rho - state.rho)) * config.dx
        self.assertLessEqual(abs(change - run.boundary_mass), 1e-12)

    def test_damped_run(self):
        config = device_config(n_cells=32, bias=0.2, damping_tau=1.0)
        run = device_run(rest_state(config), config, t_end=0.5)
        self.assertTrue(bool(jnp.all(run.state.rho > 0)))
        self.assertEqual(run.potential.phi_right, -0.2)

    def test_step_errors(self):
        config = device_config(n_cells=16, doping=1.0)
        state = rest_state(config)
        with self.assertRaises(StepRejectedError):
            device_step(state, config, 10.0)
        negative = MomentState(state.rho.at[3].set(-0.1), state.momentum)
        with self.assertRaises(PositivityError) as ctx:
            device_step(negative, config, 0.01)
        self.assertEqual(ctx.exception.details()["index"], 3)

    def test_run_needs_horizon(self):
        config = device_config(n_cells=16)
        with self.assertRaises(InvalidInputError):
            device_run(rest_state(config), config)

    def test_sonic_diagnostics(self):
        rho = jnp.ones(6)
        u = jnp.array([0.2, 0.2, 0.8, 0.8, 0.2, 0.2])
        report = sonic_diagnostics(MomentState(rho, rho * u))
        self.assertEqual(report.points, [1, 3])
        self.assertEqual(report.shocks, [3])


class TestIVCurve(unittest.TestCase):
    def test_equilibrium_carries_no_current(self):
        config = device_config(n_cells=16, doping=1.0)
        rows = iv_curve(config, [0.0])
        self.assertEqual(len(rows), 1)
        self.assertTrue(rows[0].converged)
        self.assertAlmostEqual(rows[0].current, 0.0, places=12)
        self.assertEqual(rows[0].sonic_shocks, 0)

    def test_unconverged_row_is_flagged(self):
        config = device_config(n_cells=16)
        rows = iv_curve(config, [0.2], max_steps=10)
        self.assertFalse(rows[0].converged)
        self.assertTrue(np.isnan(rows[0].current))


if __name__ == '__main__':
    unittest.main()
