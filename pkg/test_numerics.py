import math
import unittest

import numpy as np
from scipy import special

from errors import DimensionError, DomainError, FactorizationError
from numerics import (SpdMatrix, digamma, log_gamma, log_gamma_ratio,
                      log_gamma_ratio_asymptotic, logdet_spd, solve_spd)


def random_spd(rng, k):
    A = rng.standard_normal((k, k))
    return A @ A.T + k * np.eye(k)


class LinearAlgebraTest(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(11)

    def test_logdet_examples(self):
        self.assertEqual(logdet_spd(np.eye(3)), 0.0)
        self.assertAlmostEqual(logdet_spd(np.diag([2.0, 8.0])), math.log(16.0), places=12)

    def test_logdet_matches_slogdet(self):
        M = random_spd(self.rng, 5)
        sign, expected = np.linalg.slogdet(M)
        self.assertEqual(sign, 1.0)
        self.assertLess(abs(logdet_spd(M) - expected), 1e-9 * abs(expected))

    def test_logdet_scaling(self):
        M = random_spd(self.rng, 4)
        k = 3.7
        self.assertAlmostEqual(logdet_spd(k * M), 4 * math.log(k) + logdet_spd(M), places=10)

    def test_not_positive_definite_names_minor(self):
        with self.assertRaises(FactorizationError) as ctx:
            logdet_spd(np.array([[1.0, 2.0], [2.0, 1.0]]))
        self.assertEqual(ctx.exception.minor, 2)

    def test_asymmetric_rejected(self):
        with self.assertRaises(FactorizationError):
            SpdMatrix.from_array(np.array([[2.0, 1.0], [0.0, 2.0]]))

    def test_solve_examples(self):
        B = self.rng.standard_normal((3, 2))
        np.testing.assert_allclose(solve_spd(np.eye(3), B), B)
        np.testing.assert_allclose(solve_spd(np.array([[4.0]]), np.array([8.0])), [2.0])

    def test_solve_matches_inverse(self):
        M = random_spd(self.rng, 6)
        B = self.rng.standard_normal((6, 3))
        self.assertLessEqual(np.max(np.abs(solve_spd(M, B) - np.linalg.inv(M) @ B)), 1e-8)

    def test_solve_residual_large(self):
        M = random_spd(self.rng, 50)
        B = self.rng.standard_normal((50, 4))
        S = solve_spd(M, B)
        self.assertLessEqual(np.linalg.norm(M @ S - B), 1e-8 * np.linalg.norm(B))

    def test_solve_dimension_mismatch(self):
        with self.assertRaises(DimensionError):
            solve_spd(np.eye(3), np.ones(4))


class SpecialFunctionTest(unittest.TestCase):
    POINTS = [0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.3, 5.0, 5.5, 7.25,
              9.99, 10.0, 11.9, 12.0, 15.5, 25.0, 50.5, 100.0, 333.3, 1000.0]

    def test_log_gamma_examples(self):
        self.assertAlmostEqual(log_gamma(1.0), 0.0, places=12)
        self.assertAlmostEqual(log_gamma(5.0), math.log(24.0), places=12)
        self.assertAlmostEqual(log_gamma(5.5), 3.957813968, places=9)

    def test_log_gamma_reference(self):
        for x in self.POINTS:
            self.assertLess(abs(log_gamma(x) - special.gammaln(x)), 1e-10, msg=f"x={x}")

    def test_log_gamma_large_arguments(self):
        for x in (1e4, 1e5, 1e6):
            expected = special.gammaln(x)
            self.assertLess(abs(log_gamma(x) - expected), 1e-14 * expected, msg=f"x={x}")

    def test_log_gamma_recurrence(self):
        for x in np.linspace(0.5, 100.0, 60):
            self.assertLess(abs(log_gamma(x + 1) - log_gamma(x) - math.log(x)), 1e-10)

    def test_digamma_examples(self):
        self.assertAlmostEqual(digamma(1.0), -0.5772156649, places=10)
        self.assertAlmostEqual(digamma(2.0), 0.4227843351, places=10)
        self.assertAlmostEqual(digamma(5.5), 1.611093149, places=9)

    def test_digamma_reference(self):
        for x in self.POINTS:
            self.assertLess(abs(digamma(x) - special.digamma(x)), 1e-10, msg=f"x={x}")

    def test_digamma_recurrence(self):
        for x in np.linspace(0.5, 100.0, 60):
            self.assertLess(abs(digamma(x + 1) - digamma(x) - 1.0 / x), 1e-10)

    def test_domain_errors(self):
        for fn in (log_gamma, digamma):
            with self.assertRaises(DomainError):
                fn(0.0)
            with self.assertRaises(DomainError):
                fn(-1.5)

    def test_log_gamma_ratio_matches_difference(self):
        for x, a in [(5.0, 0.5), (20.0, 1.5), (60.0, 3.0), (1e6, 2.5), (30.0, -2.0)]:
            expected = special.gammaln(x - a) - special.gammaln(x)
            self.assertLess(abs(log_gamma_ratio(x, a) - expected), 1e-9, msg=f"x={x} a={a}")
        self.assertEqual(log_gamma_ratio(7.0, 0.0), 0.0)

    def test_gamma_ratio_expansion(self):
        for n_star in (50.0, 100.0, 1e3, 1e6):
            for m in range(1, 7):
                exact = log_gamma_ratio(n_star, m / 2.0)
                approx = log_gamma_ratio_asymptotic(n_star, m)
                self.assertLessEqual(abs(exact - approx), 30.0 / n_star ** 2,
                                     msg=f"n*={n_star} m={m}")


if __name__ == '__main__':
    unittest.main()
