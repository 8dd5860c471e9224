"""Exact flow and the damped-HMC transition blocks."""

import math
import unittest

import numpy as np
import numpy.testing as npt

from hmclab.errors import ParameterError
from hmclab.flow import (compose, eta_from_friction, exact_flow, friction_rate,
                         propagate_moments, refresh_block, rotate,
                         rotation_block, transition_block)
from hmclab.models import PhaseState, Spectrum, Target, energy


class Test_ExactFlow(unittest.TestCase):
    def setUp(self):
        self.spectrum = Spectrum.from_eigenvalues([1.0, 4.0, 9.0])
        self.state = PhaseState([1.0, -0.5, 2.0], [0.3, 1.0, -1.0])

    def test_zero_time_is_identity(self):
        out = exact_flow(self.spectrum, self.state, 0.0)
        npt.assert_array_equal(out.x, self.state.x)
        npt.assert_array_equal(out.v, self.state.v)

    def test_quarter_rotation(self):
        out = exact_flow(Spectrum.from_eigenvalues([1.0]), PhaseState([1.0], [0.0]), math.pi / 2)
        npt.assert_allclose(out.x, [0.0], atol=1e-15)
        npt.assert_allclose(out.v, [-1.0])

    def test_energy_conserved(self):
        target = Target.quadratic(Spectrum.from_eigenvalues([4.0]))
        start = PhaseState([1.0], [1.0])
        for t in (0.1, 1.7, 12.3):
            self.assertAlmostEqual(energy(target, exact_flow(target, start, t)), energy(target, start), places=12)

    def test_composition(self):
        two = exact_flow(self.spectrum, exact_flow(self.spectrum, self.state, 0.4), 1.3)
        one = exact_flow(self.spectrum, self.state, 1.7)
        npt.assert_allclose(two.x, one.x, atol=1e-10)
        npt.assert_allclose(two.v, one.v, atol=1e-10)

    def test_negative_time(self):
        with self.assertRaises(ParameterError):
            exact_flow(self.spectrum, self.state, -1.0)

    def test_rotation_block_matches_flow(self):
        M = rotation_block(4.0, 0.7)
        x, v = rotate(4.0, 1.0, 0.3, 0.7)
        npt.assert_allclose(M @ [1.0, 0.3], [x, v])


class Test_TransitionBlock(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(11)
        self.triples = list(zip(rng.uniform(0.1, 100.0, 50), rng.uniform(0.01, 3.0, 50), rng.uniform(0.0, 0.99, 50)))

    def test_full_refresh(self):
        block = transition_block(2.0, 0.5, 0.0)
        c, s = math.cos(math.sqrt(2.0) * 0.5), math.sin(math.sqrt(2.0) * 0.5)
        npt.assert_allclose(block.A, [[c, 0.0], [0.0, 0.0]], atol=1e-15)
        npt.assert_allclose(block.B, [[s / math.sqrt(2.0), 0.0], [0.0, 1.0]], atol=1e-15)

    def test_determinant(self):
        for sigma, T, eta in self.triples:
            self.assertAlmostEqual(np.linalg.det(transition_block(sigma, T, eta).A), eta**2, places=12)

    def test_stationary_law_preserved(self):
        for sigma, T, eta in self.triples:
            block = transition_block(sigma, T, eta)
            Pi = block.stationary_covariance
            npt.assert_allclose(block.A @ Pi @ block.A.T + block.B @ block.B.T, Pi, atol=1e-12)

    def test_equals_refresh_rotation_refresh(self):
        for sigma, T, eta in self.triples[:10]:
            rotation = (rotation_block(sigma, T), np.zeros((2, 0)))
            A, B = compose(refresh_block(eta), rotation, refresh_block(eta))
            block = transition_block(sigma, T, eta)
            npt.assert_allclose(A, block.A, atol=1e-13)
            npt.assert_allclose(B, block.B, atol=1e-13)

    def test_half_refresh_splitting(self):
        sigma, T, eta, K = 3.0, 0.8, 0.6, 5
        half = refresh_block(eta)
        full = compose(half, half)
        rotation = (rotation_block(sigma, T), np.zeros((2, 0)))
        mean, cov = np.array([1.5, -0.4]), np.diag([0.2, 2.0])

        m1, c1 = mean, cov
        for _ in range(K):
            m1, c1 = propagate_moments(compose(half, rotation, half), m1, c1)

        m2, c2 = propagate_moments(half, mean, cov)
        for _ in range(K - 1):
            m2, c2 = propagate_moments(compose(rotation, full), m2, c2)
        m2, c2 = propagate_moments(compose(rotation, half), m2, c2)

        npt.assert_allclose(m1, m2, atol=1e-12)
        npt.assert_allclose(c1, c2, atol=1e-12)

    def test_block_preserves_samples(self):
        rng = np.random.default_rng(5)
        block = transition_block(4.0, 0.6, 0.5)
        y = rng.standard_normal((100_000, 2)) * np.sqrt([0.25, 1.0])
        out = block.apply(y, rng.standard_normal((100_000, 2)))
        npt.assert_allclose(np.cov(out.T), block.stationary_covariance, atol=0.015)

    def test_simulated_step_matches_block(self):
        rng = np.random.default_rng(7)
        sigma, T, eta, n = 2.0, 0.9, 0.4, 200_000
        x0, v0 = 0.8, -0.3
        v = eta * v0 + math.sqrt(1 - eta**2) * rng.standard_normal(n)
        x, v = rotate(sigma, np.full(n, x0), v, T)
        v = eta * v + math.sqrt(1 - eta**2) * rng.standard_normal(n)

        block = transition_block(sigma, T, eta)
        npt.assert_allclose([x.mean(), v.mean()], block.A @ [x0, v0], atol=0.01)
        npt.assert_allclose(np.cov(np.vstack([x, v])), block.B @ block.B.T, atol=0.01)

    def test_invalid_parameters(self):
        with self.assertRaises(ParameterError):
            transition_block(1.0, 1.0, 1.0)
        with self.assertRaises(ParameterError):
            transition_block(1.0, 0.0, 0.5)
        with self.assertRaises(ParameterError):
            transition_block(-1.0, 1.0, 0.5)


class Test_Friction(unittest.TestCase):
    def test_round_trip(self):
        gamma = friction_rate(0.3, 0.5)
        self.assertAlmostEqual(eta_from_friction(gamma, 0.5), 0.3)
        self.assertEqual(friction_rate(0.0, 0.5), float('inf'))
        self.assertEqual(friction_rate(1.0, 0.5), 0.0)


if __name__ == '__main__':
    unittest.main()
