import math
import unittest

import numpy as np
from scipy import special
from scipy.stats import multivariate_t

from errors import CycleError, ValidationError
from model import Dag, Dataset, Hyper, standardize
from scores import (MetricKind, NetworkScorer, family_stats, log_local_score,
                    log_network_score, projection_complement, shrunk_hat, weighted_gram)


def standardized_columns(rng, n, k):
    Z = rng.standard_normal((n, k))
    Z = Z - Z.mean(axis=0)
    return Z / np.sqrt(np.sum(Z ** 2, axis=0) / (n - 1))


class ProjectionTest(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(5)

    def test_single_column_example(self):
        proj = projection_complement(np.array([[1.0], [1.0]]))
        np.testing.assert_allclose(proj.outer, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-12)
        np.testing.assert_allclose(np.abs(proj.basis[:, 0]), [1 / math.sqrt(2)] * 2, atol=1e-12)
        largest = np.argmax(np.abs(proj.basis[:, 0]))
        self.assertGreater(proj.basis[largest, 0], 0.0)

    def test_no_exogenous_columns(self):
        proj = projection_complement(np.zeros((4, 0)))
        np.testing.assert_array_equal(proj.outer, np.eye(4))

    def test_coordinate_columns(self):
        proj = projection_complement(np.eye(4)[:, :2])
        np.testing.assert_allclose(proj.outer, np.diag([0.0, 0.0, 1.0, 1.0]), atol=1e-12)

    def test_complement_properties(self):
        n, m = 30, 4
        Q = self.rng.standard_normal((n, m))
        proj = projection_complement(Q)
        P = proj.basis
        self.assertEqual(P.shape, (n, n - m))
        self.assertLessEqual(np.max(np.abs(P.T @ Q)), 1e-9)
        self.assertLessEqual(np.max(np.abs(P.T @ P - np.eye(n - m))), 1e-10)
        hat = Q @ np.linalg.solve(Q.T @ Q, Q.T)
        self.assertLessEqual(np.max(np.abs(proj.outer - (np.eye(n) - hat))), 1e-8)
        Z = self.rng.standard_normal((n, 3))
        np.testing.assert_allclose(proj.apply(Z), proj.outer @ Z, atol=1e-10)

    def test_deterministic(self):
        Q = self.rng.standard_normal((12, 2))
        np.testing.assert_array_equal(projection_complement(Q).basis,
                                      projection_complement(Q.copy()).basis)

    def test_rank_deficient(self):
        q = self.rng.standard_normal(6)
        with self.assertRaises(ValidationError):
            projection_complement(np.column_stack([q, 2 * q]))

    def test_n_not_exceeding_m(self):
        with self.assertRaises(ValidationError):
            projection_complement(np.eye(3))

    def test_residual_gram_invariant_to_rotating_basis(self):
        n, m = 20, 3
        Q = self.rng.standard_normal((n, m))
        X = standardized_columns(self.rng, n, 4)
        P = projection_complement(Q).basis
        R, _ = np.linalg.qr(self.rng.standard_normal((n - m, n - m)))
        rotated = (P @ R).T @ X
        gram = weighted_gram('residual', X, Q, Hyper())
        np.testing.assert_allclose(rotated.T @ rotated, gram.S, atol=1e-10)


class ShrunkHatTest(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(6)

    def test_example(self):
        H = shrunk_hat(np.array([[1.0], [1.0]]), V=np.array([[1.0]])).matrix
        expected = np.eye(2) - np.ones((2, 2)) / 3.0
        np.testing.assert_allclose(H, expected, atol=1e-12)

    def test_matches_direct_inverse(self):
        for n, m in [(15, 3), (40, 1), (100, 6)]:
            Q = self.rng.standard_normal((n, m))
            L = self.rng.standard_normal((m, m))
            V = L @ L.T + np.eye(m)
            H = shrunk_hat(Q, V=V).matrix
            direct = np.linalg.inv(np.eye(n) + Q @ V @ Q.T)
            self.assertLessEqual(np.max(np.abs(H - direct)), 1e-8, msg=f"n={n} m={m}")
            eig = np.linalg.eigvalsh(H)
            self.assertTrue(np.all(eig > 0.0), msg=f"n={n} m={m}")
            self.assertTrue(np.all(eig <= 1.0 + 1e-10), msg=f"n={n} m={m}")

    def test_limits(self):
        n, m = 10, 2
        Q = self.rng.standard_normal((n, m))
        tight = shrunk_hat(Q, precision=1e8 * np.eye(m)).matrix
        self.assertLessEqual(np.max(np.abs(tight - np.eye(n))), 1e-6)
        loose = shrunk_hat(Q, precision=1e-8 * np.eye(m)).matrix
        self.assertLessEqual(np.max(np.abs(loose - projection_complement(Q).outer)), 1e-6)


class LocalScoreTest(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_bge_no_parents_example(self):
        x = np.array([-1.0, 0.0, 1.0])
        expected = (-1.5 * math.log(2 * math.pi) + 0.5 * math.log(0.5)
                    + special.gammaln(2.0) - special.gammaln(0.5) - 2.0 * math.log(1.5))
        got = log_local_score('bge', x, None, None, Hyper(tau=1.0, delta=1.0))
        self.assertAlmostEqual(got, expected, places=12)

    def test_residual_without_design_equals_bge(self):
        n = 12
        Z = standardized_columns(self.rng, n, 3)
        Q = np.zeros((n, 0))
        h = Hyper(upsilon=1.0)
        bge = log_local_score('bge', Z[:, 2], Z[:, :2], Q, h)
        self.assertAlmostEqual(log_local_score('residual', Z[:, 2], Z[:, :2], Q, h), bge, places=12)
        self.assertAlmostEqual(log_local_score('bayes', Z[:, 2], Z[:, :2], Q, h), bge, places=12)

    def test_weak_effect_prior_approaches_bge(self):
        n = 20
        Z = standardized_columns(self.rng, n, 3)
        Q = self.rng.standard_normal((n, 2))
        bge = log_local_score('bge', Z[:, 0], Z[:, 1:], Q, Hyper())
        bayes = log_local_score('bayes', Z[:, 0], Z[:, 1:], Q, Hyper(upsilon=1e8))
        self.assertLess(abs(bayes - bge), 1e-5)

    def test_bayes_needs_effect_prior(self):
        n = 10
        Z = standardized_columns(self.rng, n, 2)
        with self.assertRaises(ValidationError):
            log_local_score('bayes', Z[:, 0], Z[:, 1:], np.ones((n, 1)), Hyper())

    def test_unknown_metric(self):
        with self.assertRaises(ValidationError):
            MetricKind.parse('bic')

    def test_evidence_matches_multivariate_t(self):
        """Each local score is the marginal density of x_i, a multivariate t given X_P"""
        n, m, tau, delta = 12, 2, 1.5, 2.0
        Z = standardized_columns(self.rng, n, 4)
        Q = self.rng.standard_normal((n, m))
        V = np.array([[1.0, 0.3], [0.3, 2.0]])
        h = Hyper(tau=tau, delta=delta, V=V)
        P = projection_complement(Q).basis
        x = Z[:, 0]
        parent_sets = [(), (1,), (2,), (1, 2), (1, 2, 3)]

        def t_logpdf(y, Y_P, base):
            k = Y_P.shape[1]
            scale = (tau / (delta + k)) * (base + Y_P @ Y_P.T / tau)
            return multivariate_t(loc=np.zeros(len(y)), shape=scale, df=delta + k).logpdf(y)

        cases = {
            'bge': lambda Y_P: t_logpdf(x, Y_P, np.eye(n)),
            'bayes': lambda Y_P: t_logpdf(x, Y_P, np.eye(n) + Q @ V @ Q.T),
            'residual': lambda Y_P: t_logpdf(P.T @ x, P.T @ Y_P, np.eye(n - m)),
        }
        for metric, oracle in cases.items():
            gaps = []
            for parents in parent_sets:
                X_P = Z[:, list(parents)]
                gaps.append(log_local_score(metric, x, X_P, Q, h) - oracle(X_P))
            self.assertLessEqual(max(gaps) - min(gaps), 1e-8, msg=metric)

    def test_family_stats_rate(self):
        n = 10
        Z = standardized_columns(self.rng, n, 2)
        stats = family_stats(Z.T @ Z, 1, (0,), 1.0)
        A = 1.0 + Z[:, 0] @ Z[:, 0]
        mu = (Z[:, 0] @ Z[:, 1]) / A
        self.assertAlmostEqual(stats.mu[0], mu, places=12)
        self.assertAlmostEqual(stats.rate, 0.5 + 0.5 * (Z[:, 1] @ Z[:, 1] - mu * A * mu), places=10)


class NetworkScoreTest(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(8)
        n = 20
        X = rng.standard_normal((n, 3))
        X[:, 1] += 0.8 * X[:, 0]
        X[:, 2] += 0.8 * X[:, 1]
        self.ds = standardize(Dataset.create(X, rng.standard_normal((n, 2))))
        self.h = Hyper(upsilon=1.0)

    def test_markov_equivalent_chains_score_equal(self):
        forward = Dag(3, {(0, 1), (1, 2)})
        backward = Dag(3, {(2, 1), (1, 0)})
        for metric in MetricKind:
            a = log_network_score(metric, forward, self.ds, self.h)
            b = log_network_score(metric, backward, self.ds, self.h)
            self.assertLessEqual(abs(a - b), 1e-8 * abs(a), msg=metric.value)

    def test_sum_of_local_scores(self):
        g = Dag(3, {(0, 2), (1, 2)})
        scorer = NetworkScorer(self.ds, 'residual', self.h)
        expected = sum(scorer.local(i, g.parents(i)) for i in range(3))
        self.assertEqual(log_network_score('residual', g, self.ds, self.h, scorer), expected)

    def test_memo_reuses_local_scores(self):
        scorer = NetworkScorer(self.ds, 'bge', self.h)
        first = scorer.local(2, (1, 0))
        second = scorer.local(2, (0, 1))
        self.assertEqual(first, second)
        self.assertEqual((scorer.misses, scorer.hits), (1, 1))

    def test_cyclic_graph_rejected(self):
        with self.assertRaises(CycleError):
            log_network_score('bge', Dag(3, {(0, 1), (1, 0)}), self.ds, self.h)


if __name__ == '__main__':
    unittest.main()
