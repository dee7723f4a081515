import jax
import jax.numpy as jnp
import numpy as np

import unittest
from wblab import *


class TestPeriodicGrid(unittest.TestCase):
    def test_nodes_and_wavenumbers(self):
        grid = PeriodicGrid(16, 4.0)
        self.assertTrue(jnp.allclose(jnp.diff(grid.nodes), 0.25))
        self.assertEqual(float(grid.wavenumbers[0]), 0.0)
        k = grid.wavenumbers
        self.assertTrue(jnp.allclose(k[1:8], -k[15:8:-1]))

    def test_origin_shifts_nodes(self):
        grid = PeriodicGrid(8, 2.0, -1.0)
        self.assertAlmostEqual(float(grid.nodes[0]), -1.0)
        self.assertAlmostEqual(float(grid.nodes[4]), 0.0)

    def test_invalid_grid(self):
        with self.assertRaises(InvalidInputError):
            PeriodicGrid(1, 1.0)
        with self.assertRaises(InvalidInputError):
            PeriodicGrid(8, -1.0)

    def test_field_shape_checked(self):
        with self.assertRaises(InvalidInputError):
            RealField(PeriodicGrid(8, 1.0), jnp.zeros(7))


class TestSpectralDerivative(unittest.TestCase):
    def test_single_mode(self):
        length = 3.0
        grid = PeriodicGrid(32, length)
        f = RealField.from_function(grid, lambda x: jnp.sin(2 * jnp.pi * x / length))
        expected = (2 * jnp.pi / length) * jnp.cos(2 * jnp.pi * grid.nodes / length)
        self.assertLessEqual(float(jnp.max(jnp.abs(spectral_derivative(f).samples - expected))), 1e-12)

    def test_constant(self):
        grid = PeriodicGrid(16, 1.0)
        f = RealField(grid, jnp.full(16, 4.2))
        self.assertLessEqual(float(jnp.max(jnp.abs(spectral_derivative(f).samples))), 1e-13)

    def test_two_modes(self):
        grid = PeriodicGrid(64, 2 * jnp.pi)
        f = RealField.from_function(grid, lambda x: jnp.sin(3 * x) + jnp.cos(5 * x))
        x = grid.nodes
        expected = 3 * jnp.cos(3 * x) - 5 * jnp.sin(5 * x)
        self.assertLessEqual(float(jnp.max(jnp.abs(spectral_derivative(f).samples - expected))), 1e-12)
        self.assertLessEqual(abs(spectral_derivative(f, 2).mean()), 1e-13)

    def test_non_finite_rejected(self):
        grid = PeriodicGrid(8, 1.0)
        with self.assertRaises(InvalidInputError):
            spectral_derivative(RealField(grid, jnp.full(8, jnp.nan)))


class TestApplySymbol(unittest.TestCase):
    def setUp(self):
        self.grid = PeriodicGrid(64, 2 * jnp.pi)
        self.cos = RealField.from_function(self.grid, jnp.cos)

    def test_hilbert_on_cosine(self):
        out = apply_symbol(self.cos, hilbert_symbol(1.0))
        expected = -jnp.sin(self.grid.nodes) / jnp.tanh(1.0)
        self.assertTrue(jnp.allclose(out.samples, expected, atol=1e-12))

    def test_stream_on_cosine(self):
        out = apply_symbol(self.cos, stream_symbol(1.0))
        expected = -jnp.tanh(1.0) * jnp.sin(self.grid.nodes)
        self.assertTrue(jnp.allclose(out.samples, expected, atol=1e-12))

    def test_stream_inverts_hilbert(self):
        f = RealField.from_function(self.grid, lambda x: jnp.exp(jnp.sin(x)))
        f = f.replace(samples=f.samples - jnp.mean(f.samples))
        back = apply_symbol(apply_symbol(f, hilbert_symbol(0.7)), stream_symbol(0.7))
        self.assertLessEqual(float(jnp.max(jnp.abs(back.samples + f.samples))), 1e-12)

    def test_hilbert_needs_mean_free(self):
        with self.assertRaises(PreconditionError):
            apply_symbol(RealField(self.grid, 1.0 + self.cos.samples), hilbert_symbol(1.0))

    def test_linearity(self):
        g = RealField.from_function(self.grid, lambda x: jnp.sin(2 * x))
        s = stream_symbol(2.0)
        combined = apply_symbol(RealField(self.grid, 2.0 * self.cos.samples - 3.0 * g.samples), s)
        separate = 2.0 * apply_symbol(self.cos, s).samples - 3.0 * apply_symbol(g, s).samples
        self.assertTrue(jnp.allclose(combined.samples, separate, atol=1e-12))

    def test_parseval(self):
        f = RealField.from_function(self.grid, lambda x: jnp.exp(jnp.cos(x)))
        physical = float(jnp.sum(f.samples ** 2) * self.grid.spacing)
        spectral = float(jnp.sum(jnp.abs(spectrum(f)) ** 2)) * self.grid.length / self.grid.n_points ** 2
        self.assertAlmostEqual(physical / spectral, 1.0, places=12)


class TestDealiasedProduct(unittest.TestCase):
    def test_identity(self):
        grid = PeriodicGrid(32, 2 * jnp.pi)
        g = RealField.from_function(grid, lambda x: jnp.exp(jnp.sin(x)))
        one = RealField(grid, jnp.ones(32))
        self.assertTrue(jnp.allclose(dealiased_product(one, g).samples, g.samples, atol=1e-13))

    def test_trig_identity(self):
        grid = PeriodicGrid(32, 2 * jnp.pi)
        f = RealField.from_function(grid, lambda x: jnp.cos(2 * x))
        g = RealField.from_function(grid, lambda x: jnp.cos(3 * x))
        x = grid.nodes
        expected = 0.5 * jnp.cos(x) + 0.5 * jnp.cos(5 * x)
        self.assertLessEqual(float(jnp.max(jnp.abs(dealiased_product(f, g).samples - expected))), 1e-12)

    def test_no_aliasing(self):
        grid = PeriodicGrid(16, 2 * jnp.pi)
        f = RealField.from_function(grid, lambda x: jnp.cos(7 * x))
        out = dealiased_product(f, f)
        # cos²(7x) = 1/2 + cos(14x)/2 and mode 14 lies outside the band
        self.assertTrue(jnp.allclose(out.samples, 0.5, atol=1e-13))

    def test_commutative(self):
        grid = PeriodicGrid(32, 2 * jnp.pi)
        f = RealField.from_function(grid, lambda x: jnp.exp(jnp.sin(x)))
        g = RealField.from_function(grid, lambda x: jnp.cos(3 * x))
        self.assertLessEqual(float(jnp.max(jnp.abs(dealiased_product(f, g).samples
                                                    - dealiased_product(g, f).samples))), 1e-15)

    def test_grid_mismatch(self):
        f = RealField(PeriodicGrid(16, 1.0), jnp.zeros(16))
        g = RealField(PeriodicGrid(16, 2.0), jnp.zeros(16))
        with self.assertRaises(InvalidInputError):
            dealiased_product(f, g)


class TestSpectralTools(unittest.TestCase):
    def test_antiderivative(self):
        grid = PeriodicGrid(32, 2 * jnp.pi)
        f = RealField.from_function(grid, jnp.cos)
        self.assertTrue(jnp.allclose(spectral_antiderivative(f).samples, jnp.sin(grid.nodes), atol=1e-13))

    def test_interpolate_between_nodes(self):
        grid = PeriodicGrid(32, 2 * jnp.pi, -jnp.pi)
        f = RealField.from_function(grid, lambda x: jnp.sin(2 * x) + 0.5 * jnp.cos(x))
        points = jnp.array([0.123, 1.7, -2.9])
        expected = jnp.sin(2 * points) + 0.5 * jnp.cos(points)
        self.assertTrue(jnp.allclose(fourier_interpolate(f, points), expected, atol=1e-12))

    def test_resample_keeps_band_limited_field(self):
        grid = PeriodicGrid(16, 2 * jnp.pi)
        f = RealField.from_function(grid, lambda x: jnp.cos(3 * x))
        fine = resample(f, 64)
        self.assertTrue(jnp.allclose(fine.samples, jnp.cos(3 * fine.grid.nodes), atol=1e-13))
        back = resample(fine, 16)
        self.assertTrue(jnp.allclose(back.samples, f.samples, atol=1e-13))

    def test_filter_and_tail(self):
        grid = PeriodicGrid(64, 2 * jnp.pi)
        smooth = RealField.from_function(grid, jnp.cos)
        self.assertTrue(jnp.allclose(exponential_filter(smooth).samples, smooth.samples, atol=1e-14))
        self.assertLess(spectral_tail(smooth), 1e-14)
        rough = RealField.from_function(grid, lambda x: jnp.cos(x) + jnp.cos(30 * x))
        self.assertAlmostEqual(spectral_tail(rough), 1.0, places=10)
        self.assertEqual(spectral_tail(RealField(grid, jnp.zeros(64))), 0.0)


class TestHermite(unittest.TestCase):
    def test_low_orders(self):
        self.assertAlmostEqual(float(hermite_poly(0, 3.7)), 1.0)
        self.assertAlmostEqual(float(hermite_poly(1, 2.5)), 5.0)
        self.assertAlmostEqual(float(hermite_poly(2, 1.0)), 2.0)

    def test_recurrence(self):
        x = jnp.asarray(np.random.default_rng(0).uniform(-5.0, 5.0, 100))
        for n in range(1, 30):
            lhs = hermite_poly(n + 1, x)
            rhs = 2 * x * hermite_poly(n, x) - 2 * n * hermite_poly(n - 1, x)
            self.assertTrue(jnp.allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * float(jnp.max(jnp.abs(lhs)))))

    def test_capability(self):
        with self.assertRaises(CapabilityError):
            hermite_poly(65, 0.0)

    def test_functions_orthonormal(self):
        nodes, weights = np.polynomial.hermite.hermgauss(60)
        psi = hermite_functions(10, nodes) * jnp.exp(0.5 * jnp.asarray(nodes) ** 2)
        gram = psi @ (weights[:, None] * psi.T)
        self.assertTrue(jnp.allclose(gram, jnp.eye(11), atol=1e-12))


if __name__ == '__main__':
    unittest.main()
