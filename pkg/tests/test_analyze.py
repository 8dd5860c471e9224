"""Closed-form spectral rates, expected contraction and schedule costs."""

import math
import unittest

import numpy as np
import numpy.testing as npt

from hmclab.analyze import (chebyshev_contraction, chebyshev_total_time,
                            dissipation, expected_cos2, iterations_to_accuracy,
                            minimax_gap, optimal_rhmc_lambda, predicted_cost,
                            rhmc_expected_time, spectral_radius,
                            worst_case_rate)
from hmclab.errors import ParameterError
from hmclab.flow import transition_block
from hmclab.integrate import fitted_order
from hmclab.models import Interval, Spectrum
from hmclab.sample import auto_spec, optimal_params


class Test_SpectralRadius(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(21)
        self.triples = list(zip(rng.uniform(0.01, 100.0, 100), rng.uniform(0.01, 3.0, 100), rng.uniform(0.0, 0.99, 100)))

    def test_matches_direct_eigensolve(self):
        for sigma, T, eta in self.triples:
            A = transition_block(sigma, T, eta).A
            direct = np.linalg.eigvalsh(A.T @ A).max()
            npt.assert_allclose(spectral_radius(sigma, T, eta).rho, direct, rtol=1e-10, atol=1e-12)

    def test_asymptotic_rate_is_radius_of_A(self):
        for sigma, T, eta in self.triples[:20]:
            A = transition_block(sigma, T, eta).A
            npt.assert_allclose(spectral_radius(sigma, T, eta).asymptotic_rate,
                                np.abs(np.linalg.eigvals(A)).max(), rtol=1e-6, atol=1e-12)

    def test_eigenvalue_product(self):
        rng = np.random.default_rng(22)
        for sigma, T, eta in zip(rng.uniform(0.1, 10.0, 100), rng.uniform(0.05, 3.0, 100), rng.uniform(0.0, 0.99, 100)):
            report = spectral_radius(sigma, T, eta)
            self.assertAlmostEqual(report.rho * (report.b - report.rho), eta**4, places=12)

    def test_no_memory(self):
        for sigma, T in ((1.0, 0.3), (7.0, 1.1)):
            self.assertAlmostEqual(spectral_radius(sigma, T, 0.0).rho, math.cos(math.sqrt(sigma) * T)**2, places=14)

    def test_quarter_period(self):
        for eta in (0.1, 0.5, 0.9):
            report = spectral_radius(1.0, math.pi / 2, eta)
            self.assertAlmostEqual(report.b, 2 * eta**2, places=14)
            self.assertAlmostEqual(report.rho, eta**2, places=7)

    def test_invalid_inputs(self):
        with self.assertRaises(ParameterError):
            spectral_radius(0.0, 1.0, 0.5)
        with self.assertRaises(ParameterError):
            spectral_radius(1.0, 1.0, 1.0)


class Test_WorstCaseRate(unittest.TestCase):
    def test_single_eigenvalue(self):
        self.assertEqual(worst_case_rate([3.0], 0.4, 0.2), spectral_radius(3.0, 0.4, 0.2).rho)

    def test_permutation_and_inclusion(self):
        values = [1.0, 5.0, 20.0, 80.0]
        base = worst_case_rate(values, 0.2, 0.3)
        self.assertEqual(worst_case_rate(values[::-1], 0.2, 0.3), base)
        self.assertGreaterEqual(worst_case_rate(values + [40.0], 0.2, 0.3), base)
        self.assertEqual(worst_case_rate(Spectrum.from_eigenvalues(values), 0.2, 0.3), base)

    def test_baseline_gap_is_order_one_over_kappa(self):
        for kappa in (1e2, 1e4):
            T = math.pi / (math.sqrt(kappa) + 1.0)
            self.assertGreaterEqual(1 - worst_case_rate(Interval(1.0, kappa), T, 0.0), 0.05 / kappa)

    def test_damped_gap_is_order_one_over_sqrt_kappa(self):
        kappa = 1e4
        params = optimal_params('damped', 1.0, kappa)
        rate = worst_case_rate(Interval(1.0, kappa), params['T'], params['eta'], measure='asymptotic')
        self.assertLessEqual(math.sqrt(rate), 1 - 0.5 / math.sqrt(kappa))

    def test_minimax_duration(self):
        for mu, L in ((1.0, 100.0), (0.3, 12.0)):
            self.assertAlmostEqual(minimax_gap(mu, L, math.pi / (math.sqrt(L) + math.sqrt(mu))), 0.0, places=14)

    def test_iterations_to_accuracy(self):
        K = iterations_to_accuracy(0.25, 1e-2)
        self.assertAlmostEqual(0.5**K, 1e-2)
        self.assertEqual(iterations_to_accuracy(1.0, 1e-2), math.inf)
        with self.assertRaises(ParameterError):
            iterations_to_accuracy(0.5, 1.5)


class Test_RandomizedDurations(unittest.TestCase):
    def test_closed_form_values(self):
        self.assertEqual(expected_cos2(2.0, 0.0), 1.0)
        self.assertAlmostEqual(expected_cos2(1.0, 0.5), 0.75)
        npt.assert_allclose(expected_cos2([1.0, 4.0], 0.25), [1 - 0.125 / 1.25, 0.75])

    def test_monte_carlo(self):
        rng = np.random.default_rng(8)
        n = 1_000_000
        for sigma, lam in zip(rng.uniform(0.5, 50.0, 10), rng.uniform(0.05, 2.0, 10)):
            draws = np.cos(math.sqrt(sigma) * rng.exponential(lam, n))**2
            se = draws.std() / math.sqrt(n)
            self.assertLess(abs(draws.mean() - expected_cos2(sigma, lam)), 3 * se)

    def test_expected_time_at_optimum(self):
        mu = 4.0
        self.assertAlmostEqual(rhmc_expected_time(mu, 100.0, 1 / (2 * math.sqrt(mu)), 1e-2),
                               4 / math.sqrt(mu) * math.log(100.0))
        self.assertGreater(rhmc_expected_time(mu, 100.0, 1e-6, 1e-2), 1e4)

    def test_lambda_minimizer(self):
        for mu in (1.0, 4.0, 0.01):
            self.assertAlmostEqual(optimal_rhmc_lambda(mu, 100.0) * 2 * math.sqrt(mu), 1.0, delta=1e-3)


class Test_Chebyshev(unittest.TestCase):
    def test_contraction_reaches_accuracy(self):
        K = optimal_params('chebyshev', 1.0, 100.0, eps=1e-2)['cycle']
        self.assertLessEqual(chebyshev_contraction(Interval(1.0, 100.0), K, 10_000), 1e-2)

    def test_total_time(self):
        K = optimal_params('chebyshev', 1.0, 100.0, eps=1e-2)['cycle']
        self.assertLessEqual(chebyshev_total_time(1.0, 100.0, K), 8 * math.log(100.0))

    def test_schedule_length(self):
        params = optimal_params('chebyshev', 1.0, 100.0, eps=1e-2)
        self.assertEqual(params['K'], 47)
        self.assertEqual(params['cycle'], params['K'])
        self.assertEqual(len(params['schedule']), params['K'])
        spec = auto_spec('chebyshev', Spectrum.from_bounds(4, 1.0, 100.0), 500, eps=1e-2)
        self.assertEqual((spec.K, spec.cycle), (500, 47))

    def test_single_eigenvalue_root(self):
        self.assertAlmostEqual(chebyshev_contraction(Spectrum.from_eigenvalues([6.0]), 1), 0.0, places=12)


class Test_Costs(unittest.TestCase):
    def test_sqrt_kappa_separation(self):
        kappas = [1e2, 1e3, 1e4]
        for variant, exponent in (('baseline', 1.0), ('damped', 0.5)):
            iterations = [predicted_cost(variant, 1.0, kappa, 1e-3)['iterations'] for kappa in kappas]
            self.assertAlmostEqual(fitted_order(kappas, iterations), exponent, delta=0.1)

    def test_rhmc_and_chebyshev_costs(self):
        rhmc = predicted_cost('rhmc', 1.0, 100.0, 1e-2)
        self.assertAlmostEqual(rhmc['total_time'], 4 * math.log(100.0), places=6)
        chebyshev = predicted_cost('chebyshev', 1.0, 100.0, 1e-2)
        self.assertEqual(chebyshev['iterations'], 47.0)
        self.assertLessEqual(chebyshev['rate']**(47 / 2), 1e-2)

    def test_coordinate_has_no_closed_form(self):
        with self.assertRaises(ParameterError):
            predicted_cost('coordinate', 1.0, 100.0, 1e-2)

    def test_dissipation(self):
        params = optimal_params('damped', 1.0, 1e4)
        value = dissipation(1 / params['T'], params['eta'])
        self.assertTrue(0.25 <= value <= 4.0)
        self.assertEqual(dissipation(3.0, 1.0), 0.0)
        self.assertEqual(dissipation(3.0, 0.0), 3.0)
        with self.assertRaises(ParameterError):
            dissipation(-1.0, 0.5)


if __name__ == '__main__':
    unittest.main()
