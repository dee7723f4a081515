import jax
import jax.numpy as jnp
import numpy as np

import unittest
from wblab import *


def _kdv_soliton(c):
    return lambda x: 0.5 * c / jnp.cosh(0.5 * jnp.sqrt(c) * x) ** 2


class TestConformalRhs(unittest.TestCase):
    def test_rest_state(self):
        grid = PeriodicGrid(64, 2 * jnp.pi)
        gamma_t, phi_t = conformal_rhs(rest_surface(grid))
        self.assertEqual(float(jnp.max(jnp.abs(gamma_t.samples))), 0.0)
        self.assertEqual(float(jnp.max(jnp.abs(phi_t.samples))), 0.0)
        self.assertTrue(jnp.allclose(surface_abscissa(rest_surface(grid)), grid.nodes))

    def test_mean_level_only_shifts_potential(self):
        grid = PeriodicGrid(64, 2 * jnp.pi)
        state = linear_wave_state(grid, k=2, eps=0.05, h0=1.3)
        lifted = state.replace(gamma=state.gamma.replace(samples=state.gamma.samples + 0.2))
        gamma_t, phi_t = conformal_rhs(state)
        lifted_gamma_t, lifted_phi_t = conformal_rhs(lifted)
        self.assertTrue(jnp.allclose(lifted_gamma_t.samples, gamma_t.samples, atol=1e-14))
        self.assertTrue(jnp.allclose(lifted_phi_t.samples - phi_t.samples, -0.2 * state.g, atol=1e-14))

    def test_invariants(self):
        grid = PeriodicGrid(64, 2 * jnp.pi)
        self.assertEqual(wave_mass(rest_surface(grid)), 0.0)
        self.assertEqual(wave_energy(rest_surface(grid)), 0.0)
        eps = 0.05
        state = linear_wave_state(grid, k=1, eps=eps, kind="standing")
        self.assertAlmostEqual(wave_energy(state), 0.5 * state.g * eps ** 2 * np.pi, places=12)

    def test_folding(self):
        state = linear_wave_state(PeriodicGrid(32, 2 * jnp.pi), eps=0.01)
        with self.assertRaises(FoldingError) as ctx:
            conformal_rhs(state, j_min=10.0)
        self.assertLess(ctx.exception.details()["jacobian_min"], 10.0)

    def test_invalid_states(self):
        grid = PeriodicGrid(16, 1.0)
        zero = RealField(grid, jnp.zeros(16))
        with self.assertRaises(InvalidInputError):
            ConformalSurfaceState(zero, zero, -1.0)
        with self.assertRaises(InvalidInputError):
            linear_wave_state(grid, kind="breaking")


class TestEvolve(unittest.TestCase):
    def test_rest_stays_at_rest(self):
        run = evolve(rest_surface(PeriodicGrid(32, 2 * jnp.pi)), t_end=1.0)
        self.assertEqual(float(jnp.max(jnp.abs(run.state.gamma.samples))), 0.0)
        self.assertAlmostEqual(run.time, 1.0, places=12)

    def test_linear_dispersion(self):
        grid = PeriodicGrid(32, 2 * jnp.pi)
        h0, g, eps = 1.0, 1.0, 1e-8
        state = linear_wave_state(grid, k=1, eps=eps, h0=h0, g=g)
        t_end = 1.0
        run = evolve(state, t_end, dt=0.01)
        xi = grid.nodes
        gamma = run.state.gamma.samples
        a = 2.0 * float(jnp.mean(gamma * jnp.cos(xi)))
        b = 2.0 * float(jnp.mean(gamma * jnp.sin(xi)))
        omega = np.arctan2(b, a) / t_end
        exact = np.sqrt(g * np.tanh(h0))
        self.assertLessEqual(abs(omega - exact) / exact, 1e-6)

    def test_temporal_order(self):
        state = linear_wave_state(PeriodicGrid(32, 2 * jnp.pi), k=1, eps=0.05, kind="standing")
        finals = [evolve(state, 2.0, dt=dt).state.gamma.samples for dt in (0.2, 0.1, 0.05)]
        coarse = float(jnp.max(jnp.abs(finals[0] - finals[1])))
        fine = float(jnp.max(jnp.abs(finals[1] - finals[2])))
        self.assertGreaterEqual(np.log2(coarse / fine), 3.8)

    def test_conservation(self):
        state = linear_wave_state(PeriodicGrid(64, 2 * jnp.pi), k=1, eps=0.05, kind="standing")
        run = evolve(state, 2.0, dt=0.02, snapshot_times=(0.5, 1.0))
        self.assertLessEqual(run.mass_drift, 1e-8)
        self.assertLessEqual(run.energy_drift, 1e-8)
        self.assertEqual([t for t, _ in run.snapshots], [0.5, 1.0])
        self.assertEqual(run.times[-1], run.time)

    def test_conservation_is_resolution_independent(self):
        for n, dt in ((128, 0.02), (64, 0.005)):
            with self.subTest(n=n, dt=dt):
                state = linear_wave_state(PeriodicGrid(n, 2 * jnp.pi), k=1, eps=0.05, kind="standing")
                run = evolve(state, 2.0, dt=dt)
                self.assertGreater(abs(run.mass[0]), 1e-3)
                self.assertLessEqual(run.mass_drift, 1e-8)
                self.assertLessEqual(run.energy_drift, 1e-8)

    def test_depth_is_fixed_while_strip_follows_mean_level(self):
        state = linear_wave_state(PeriodicGrid(64, 2 * jnp.pi), k=2, eps=0.08, h0=0.7, kind="standing")
        run = evolve(state, 1.5, dt=0.02)
        self.assertAlmostEqual(run.state.depth, state.depth, places=12)
        self.assertAlmostEqual(run.state.h0, 0.7 + run.state.gamma.mean(), places=12)

    def test_fixed_step_above_bound(self):
        state = linear_wave_state(PeriodicGrid(64, 2 * jnp.pi), eps=0.01)
        bound = surface_dt(state)
        with self.assertRaises(StepRejectedError) as ctx:
            evolve(state, 1.0, dt=2.0 * bound)
        self.assertAlmostEqual(ctx.exception.details()["dt_max"], bound, places=12)

    def test_under_resolved_start(self):
        grid = PeriodicGrid(64, 2 * jnp.pi)
        rough = RealField.from_function(grid, lambda x: 1e-3 * (jnp.cos(x) + jnp.cos(30 * x)))
        state = rest_surface(grid).replace(gamma=rough)
        with self.assertRaises(ResolutionError):
            evolve(state, 1.0)


class TestPetviashvili(unittest.TestCase):
    def setUp(self):
        self.grid = PeriodicGrid(1024, 80.0, -40.0)
        self.c = 1.0
        self.linear = DiagonalSymbol(lambda k: self.c + k ** 2, self.c, False, "c - d²")
        self.square = lambda u: u.replace(samples=3.0 * u.samples ** 2)

    def test_kdv_soliton(self):
        guess = RealField.from_function(self.grid, lambda x: 0.4 / jnp.cosh(0.45 * x) ** 2)
        u = petviashvili_solve(self.linear, self.square, guess)
        exact = _kdv_soliton(self.c)(self.grid.nodes)
        self.assertLessEqual(float(jnp.max(jnp.abs(u.samples - exact))), 1e-12)

    def test_fixed_point_unchanged(self):
        guess = RealField.from_function(self.grid, _kdv_soliton(self.c))
        u = petviashvili_solve(self.linear, self.square, guess)
        self.assertLessEqual(float(jnp.max(jnp.abs(u.samples - guess.samples))), 1e-12)

    def test_zero_guess(self):
        with self.assertRaises(NonConvergenceError):
            petviashvili_solve(self.linear, self.square, RealField(self.grid, jnp.zeros(1024)))


class TestBabenko(unittest.TestCase):
    def test_speeds(self):
        for a, c, tol in ((0.1, 1.048548, 1e-5), (0.45, 1.1973, 5e-4), (0.7, 1.2788, 5e-4)):
            wave = babenko_solitary(a)
            self.assertAlmostEqual(wave.speed_ratio, c, delta=tol)
            self.assertAlmostEqual(float(jnp.max(wave.profile.samples)), a, delta=1e-8)
            self.assertLessEqual(abs(float(wave.profile.samples[0])), 1e-12)
            self.assertEqual(wave.source_model, "full-euler")

    def test_window_grows_for_large_amplitudes(self):
        wave = babenko_solitary(0.7)
        self.assertGreater(wave.profile.grid.length, solitary_window(0.7))
        self.assertLessEqual(abs(float(wave.profile.samples[0])), 1e-12)

    def test_profile_shape(self):
        wave = babenko_solitary(0.3)
        eta = wave.profile.samples
        n = eta.shape[0]
        crest = n // 2
        self.assertTrue(jnp.allclose(eta[crest + 1:], eta[crest - 1:0:-1], atol=1e-10))
        self.assertTrue(bool(jnp.all(jnp.diff(eta[crest:]) <= 1e-14)))
        self.assertTrue(bool(jnp.all(jnp.diff(wave.abscissa) > 0)))
        self.assertLess(wave.residual, 1e-10)

    def test_kdv_limit(self):
        amplitudes = (0.01, 0.02, 0.04)
        gaps = [babenko_solitary(a).speed_ratio - (1.0 + 0.5 * a) for a in amplitudes]
        slope = np.polyfit(np.log(amplitudes), np.log(np.abs(gaps)), 1)[0]
        self.assertAlmostEqual(slope, 2.0, delta=0.2)

    def test_invalid(self):
        with self.assertRaises(InvalidInputError):
            babenko_solitary(0.8)
        with self.assertRaises(InvalidInputError):
            decay_rate(1.0)
        with self.assertRaises(WindowError):
            babenko_solitary(0.45, window=20.0)

    def test_decay_rate(self):
        kappa = decay_rate(1.2)
        self.assertAlmostEqual(np.tan(kappa) / kappa, 1.2, places=12)


class TestSolitaryPropagation(unittest.TestCase):
    def test_steady_and_unsteady_agree(self):
        wave = babenko_solitary(0.1)
        report = propagate_solitary(wave, t_end=10.0, n_points=512)
        self.assertLessEqual(report.amplitude_drift, 1e-3)
        self.assertLessEqual(abs(report.measured_speed - report.steady_speed), 1e-4)
        self.assertLessEqual(report.mass_drift, 1e-8)
        self.assertLessEqual(report.energy_drift, 1e-8)
        self.assertEqual(report.steps, 200)

    def test_initial_state(self):
        wave = babenko_solitary(0.2)
        state = solitary_surface_state(wave)
        self.assertAlmostEqual(state.h0, wave.depth + float(jnp.mean(wave.profile.samples)), places=12)
        self.assertAlmostEqual(state.depth, wave.depth, places=12)
        x_crest, height = track_crest(state)
        self.assertAlmostEqual(height, 0.2, places=8)
        self.assertLess(abs(x_crest), 1e-6)

    def test_rejects_shallow_water_wave(self):
        with self.assertRaises(InvalidInputError):
            solitary_surface_state(sgn_solitary(0.2))


if __name__ == '__main__':
    unittest.main()
