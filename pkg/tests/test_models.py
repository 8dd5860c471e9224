"""Targets, spectra and phase states."""

import unittest

import numpy as np
import numpy.testing as npt

from hmclab.errors import ConfigError, DimensionError, ParameterError
from hmclab.models import Interval, PhaseState, Spectrum, Target, energy, gradient


class Test_Spectrum(unittest.TestCase):
    def test_from_bounds_linear(self):
        spectrum = Spectrum.from_bounds(10, 1.0, 10.0)
        npt.assert_allclose(spectrum.sigma, np.arange(1, 11))
        self.assertEqual(spectrum.d, 10)
        self.assertEqual(spectrum.kappa, 10.0)

    def test_from_bounds_log_keeps_endpoints(self):
        spectrum = Spectrum.from_bounds(5, 1e-2, 1e2, 'log')
        self.assertEqual(spectrum.sigma[0], 1e-2)
        self.assertEqual(spectrum.sigma[-1], 1e2)
        npt.assert_allclose(np.diff(np.log(spectrum.sigma)), np.log(10.0))

    def test_bounds_enforced(self):
        with self.assertRaises(ParameterError):
            Spectrum(np.array([0.5, 2.0]), 1.0, 2.0)
        with self.assertRaises(ParameterError):
            Spectrum(np.array([1.0]), 0.0, 1.0)
        with self.assertRaises(ParameterError):
            Spectrum(np.array([1.0]), 2.0, 1.0)

    def test_eigenvalues_are_read_only(self):
        spectrum = Spectrum.from_eigenvalues([1.0, 4.0])
        with self.assertRaises(ValueError):
            spectrum.sigma[0] = 3.0

    def test_from_config(self):
        spectrum = Spectrum.from_config({'eigenvalues': [2.0, 3.0], 'mu': 1.0})
        self.assertEqual((spectrum.mu, spectrum.L), (1.0, 3.0))
        with self.assertLogs('hmclab.models', level='WARNING') as logs:
            with self.assertRaises(ConfigError):
                Spectrum.from_config({'d': 3, 'mu': 1.0})
            with self.assertRaises(ConfigError):
                Spectrum.from_config({'d': 3, 'mu': 1.0, 'L': 2.0, 'spacing': 'cubic'})
        self.assertEqual(len(logs.output), 2)
        self.assertIn("'L'", logs.output[0])
        self.assertIn('cubic', logs.output[1])

    def test_interval_grid(self):
        grid = Interval(1.0, 100.0).grid(10_000)
        self.assertEqual(grid.size, 10_000)
        self.assertEqual((grid[0], grid[-1]), (1.0, 100.0))
        npt.assert_array_equal(Interval(2.0, 2.0).grid(50), [2.0])


class Test_Target(unittest.TestCase):
    def setUp(self):
        self.quadratic = Target.quadratic(Spectrum.from_eigenvalues([1.0, 4.0]))
        self.perturbed = Target.perturbed(Spectrum.from_eigenvalues([2.0]), 0.5)

    def test_quadratic_gradient(self):
        npt.assert_allclose(gradient(self.quadratic, [1.0, 1.0]), [1.0, 4.0])
        npt.assert_array_equal(gradient(self.quadratic, np.zeros(2)), np.zeros(2))
        npt.assert_array_equal(gradient(self.perturbed, np.zeros(1)), np.zeros(1))

    def test_gradient_is_linear(self):
        rng = np.random.default_rng(3)
        x, y = rng.standard_normal((2, 2))
        npt.assert_allclose(gradient(self.quadratic, 2.5 * x - 0.7 * y),
                            2.5 * gradient(self.quadratic, x) - 0.7 * gradient(self.quadratic, y),
                            rtol=0, atol=1e-14)

    def test_perturbed_gradient_matches_finite_difference(self):
        x, step = 0.3, 1e-6
        numeric = (self.perturbed.potential([x + step]) - self.perturbed.potential([x - step])) / (2 * step)
        npt.assert_allclose(gradient(self.perturbed, [x]), [numeric], atol=1e-6)

    def test_perturbed_curvature_bounds(self):
        target = Target.perturbed(Spectrum.from_bounds(4, 1.0, 10.0), 0.3)
        x = np.linspace(-20, 20, 401)[:, None] * np.ones(4)
        diag = target.hessian_diagonal(x)
        self.assertTrue(np.all(diag >= target.mu))
        self.assertTrue(np.all(diag <= target.smoothness))
        self.assertAlmostEqual(target.smoothness, 10.3)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionError):
            gradient(self.quadratic, [1.0, 2.0, 3.0])
        with self.assertRaises(DimensionError):
            PhaseState(np.zeros(2), np.zeros(3))

    def test_quadratic_rejects_eps(self):
        with self.assertRaises(ParameterError):
            Target(Spectrum.from_eigenvalues([1.0]), 'quadratic', 0.1)

    def test_energy(self):
        one = Target.quadratic(Spectrum.from_eigenvalues([1.0]))
        self.assertAlmostEqual(energy(one, PhaseState([2.0], [0.0])), 2.0)
        self.assertAlmostEqual(energy(one, PhaseState([0.0], [2.0])), 2.0)
        self.assertAlmostEqual(energy(self.quadratic, PhaseState([1.0, 1.0], [1.0, 1.0])), 3.5)

    def test_stationary_draws(self):
        rng = np.random.default_rng(0)
        draws = self.quadratic.sample_stationary(200_000, rng)
        npt.assert_allclose(draws.var(axis=0), [1.0, 0.25], rtol=0.02)
        with self.assertRaises(ParameterError):
            self.perturbed.sample_stationary(10, rng)

    def test_from_config(self):
        target = Target.from_config({'d': 3, 'mu': 1.0, 'L': 3.0, 'kind': 'perturbed-quadratic', 'eps': 0.2})
        self.assertFalse(target.is_quadratic)
        self.assertEqual(target.to_dict()['kind'], 'perturbed-quadratic')
        with self.assertRaises(ConfigError):
            Target.from_config({'d': 3, 'mu': 1.0, 'L': 3.0, 'kind': 'banana'})


if __name__ == '__main__':
    unittest.main()
