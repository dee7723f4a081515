import jax
import jax.numpy as jnp
import numpy as np

import unittest
from wblab import *


class TestVerticalAcceleration(unittest.TestCase):
    def setUp(self):
        self.grid = PeriodicGrid(64, 2 * jnp.pi)
        self.one = RealField(self.grid, jnp.ones(64))
        self.zero = RealField(self.grid, jnp.zeros(64))

    def test_sine_velocity(self):
        u = RealField.from_function(self.grid, jnp.sin)
        gamma = vertical_acceleration(self.one, u, self.zero)
        self.assertTrue(jnp.allclose(gamma.samples, 1.0, atol=1e-12))

    def test_uniform_flow(self):
        u = RealField(self.grid, jnp.full(64, 0.4))
        gamma = vertical_acceleration(self.one, u, self.zero, alpha=ALPHA_OPT)
        self.assertLessEqual(float(jnp.max(jnp.abs(gamma.samples))), 1e-14)

    def test_ill_posed_closure(self):
        with self.assertRaises(IllPosedError):
            vertical_acceleration(self.one, self.zero, self.zero, alpha=0.5)


class TestDispersion(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(float(esgn_dispersion(0.0, ALPHA_OPT)), 1.0)
        self.assertAlmostEqual(float(exact_dispersion(1.0)), float(np.tanh(1.0)), places=15)
        self.assertEqual(float(exact_dispersion(0.0)), 1.0)
        kd = 0.1
        series = 1.0 - kd ** 2 / 3.0 + 2.0 * kd ** 4 / 15.0 - 17.0 * kd ** 6 / 315.0
        self.assertAlmostEqual(float(exact_dispersion(kd)), series, places=8)

    def test_fourth_order_match(self):
        kd = 0.05
        self.assertAlmostEqual(float(esgn_dispersion(kd, ALPHA_OPT)), float(exact_dispersion(kd)), places=10)

    def test_mismatch_orders(self):
        kd = jnp.logspace(-3, -1, 9)
        for alpha, order in ((1.0, 4.0), (ALPHA_OPT, 6.0)):
            mismatch = jnp.abs(dispersion_mismatch(kd, alpha))
            slope = np.polyfit(np.log(kd), np.log(mismatch), 1)[0]
            self.assertAlmostEqual(slope, order, delta=0.2)

    def test_positive_curve(self):
        curve = dispersion_curve(jnp.linspace(0.0, 100.0, 401))
        self.assertTrue(bool(jnp.all(curve.c2_over_gd > 0)))
        self.assertEqual(curve.alpha, ALPHA_OPT)

    def test_invalid(self):
        with self.assertRaises(IllPosedError):
            esgn_dispersion(1.0, 0.9)
        with self.assertRaises(InvalidInputError):
            exact_dispersion(-1.0)


class TestSolitaryWaves(unittest.TestCase):
    def test_sgn_speeds(self):
        for a in (0.1, 0.45, 0.7):
            wave = sgn_solitary(a)
            self.assertAlmostEqual(wave.speed_ratio, np.sqrt(1.0 + a), places=12)
            self.assertEqual(wave.source_model, "sgn")
            self.assertLess(wave.residual, 1e-10)

    def test_esgn_speeds(self):
        self.assertAlmostEqual(esgn_speed(0.1), 1.04856, delta=5e-5)
        self.assertAlmostEqual(esgn_speed(0.45), 1.1999, delta=5e-4)
        self.assertAlmostEqual(esgn_speed(0.7), 1.2946, delta=5e-4)

    def test_classical_closure_reproduces_sgn(self):
        self.assertAlmostEqual(esgn_speed(0.3, alpha=1.0), np.sqrt(1.3), delta=1e-8)

    def test_esgn_profile(self):
        wave = esgn_solitary(0.3)
        self.assertAlmostEqual(wave.speed_ratio, esgn_speed(0.3), delta=1e-7)
        self.assertAlmostEqual(float(jnp.max(wave.profile.samples)), 0.3, places=10)
        self.assertLess(wave.residual, 1e-7)
        state = shallow_state(wave)
        self.assertEqual(state.alpha, ALPHA_OPT)
        self.assertTrue(bool(jnp.all(state.h.samples > 0)))

    def test_speed_ordering(self):
        rows = speed_amplitude_sweep([0.05, 0.2, 0.35, 0.45, 0.55, 0.7])
        for row in rows:
            with self.subTest(amplitude=row.amplitude_ratio):
                self.assertEqual(row.failures, {})
                self.assertGreaterEqual(row.speeds["sgn"], row.speeds["esgn"])
                self.assertGreaterEqual(row.speeds["esgn"], row.speeds["euler"])
        self.assertAlmostEqual(rows[-1].speeds["euler"], 1.2788, delta=5e-4)

    def test_galilean_invariance(self):
        state = shallow_state(sgn_solitary(0.2))
        c = 0.2 ** 0.5 + 1.0
        shift = 0.3
        moved = state.u_bar.replace(samples=state.u_bar.samples + shift)
        base = traveling_residual(state.h, state.u_bar, c)
        boosted = traveling_residual(state.h, moved, c + shift)
        self.assertTrue(jnp.allclose(base.mass, boosted.mass, atol=1e-12))
        self.assertTrue(jnp.allclose(base.momentum, boosted.momentum, atol=1e-12))

    def test_invalid(self):
        with self.assertRaises(InvalidInputError):
            sgn_solitary(0.0)
        with self.assertRaises(IllPosedError):
            esgn_speed(0.2, alpha=0.5)
        with self.assertRaises(InvalidInputError):
            shallow_state(babenko_solitary(0.1))


class TestSweep(unittest.TestCase):
    def test_empty(self):
        self.assertEqual(speed_amplitude_sweep([]), [])

    def test_rows(self):
        rows = speed_amplitude_sweep([0.1, 0.2], models=("sgn", "esgn"))
        self.assertEqual([row.amplitude_ratio for row in rows], [0.1, 0.2])
        self.assertAlmostEqual(rows[1].speeds["sgn"], np.sqrt(1.2), places=12)
        self.assertEqual(rows[0].failures, {})

    def test_single_model_tag(self):
        rows = speed_amplitude_sweep([0.3], models="esgn")
        self.assertEqual(list(rows[0].speeds), ["esgn"])
        self.assertAlmostEqual(rows[0].speeds["esgn"], esgn_speed(0.3), places=12)

    def test_invalid(self):
        with self.assertRaises(InvalidInputError):
            speed_amplitude_sweep([0.2, 0.1])
        with self.assertRaises(InvalidInputError):
            speed_amplitude_sweep([0.1], models=("kdv",))
        with self.assertRaises(IllPosedError):
            speed_amplitude_sweep([0.1], alpha=0.5)


if __name__ == '__main__':
    unittest.main()
