import unittest

import numpy as np

from errors import CycleError, ValidationError
from model import Dag, column_rank, validate
from simgen import (EXAMPLE2_V, SimSpec, default_graph, derive_seed, example1_spec,
                    example2_design, example2_graph, example2_spec, grape_design, grape_graph,
                    grape_like_spec, group_indicators, simulate)


class DesignTest(unittest.TestCase):
    def test_example1_shapes(self):
        out = simulate(example1_spec(5, 0.001, seed=1))
        self.assertEqual(out.ds.X.shape, (10, 20))
        self.assertEqual(out.ds.Q.shape, (10, 2))
        np.testing.assert_array_equal(out.ds.Q.sum(axis=0), [5.0, 5.0])
        self.assertEqual(column_rank(out.ds.Q), 2)
        self.assertEqual(validate(out.ds), [])

    def test_example1_rejects_tiny_groups(self):
        with self.assertRaises(ValidationError):
            example1_spec(1, 1.0, seed=0)

    def test_example2_design_fixed(self):
        np.testing.assert_array_equal(example2_spec('V0', 1).Q, example2_spec('V2', 99).Q)
        self.assertEqual(example2_design().shape, (100, 3))
        self.assertEqual(column_rank(example2_design()), 3)

    def test_example2_covariances(self):
        np.testing.assert_array_equal(example2_spec('V1', 0).V_true, np.diag([10.0, 1.0, 0.1]))
        for name, V in EXAMPLE2_V.items():
            self.assertTrue(np.all(np.linalg.eigvalsh(V) > 0), msg=name)
        with self.assertRaises(ValidationError):
            example2_spec('V9', 0)

    def test_graphs(self):
        g = default_graph()
        self.assertEqual((g.p, len(g.edges)), (20, 15))
        self.assertTrue(g.is_acyclic())
        self.assertEqual(example2_graph().p, 10)
        grape = grape_graph()
        self.assertEqual(grape.p, 26)
        self.assertTrue(all(grape.in_degree(i) <= 2 for i in range(26)))
        self.assertEqual(grape, grape_graph())

    def test_grape_designs(self):
        vineyard = grape_design('vineyard')
        self.assertEqual(vineyard.shape, (50, 3))
        np.testing.assert_array_equal(vineyard.sum(axis=0), [20.0, 20.0, 10.0])
        temperature = grape_design('temperature')
        self.assertEqual(temperature.shape, (50, 6))
        self.assertEqual(column_rank(temperature), 6)
        out = simulate(grape_like_spec('temperature', seed=4))
        self.assertEqual((out.ds.n, out.ds.p, out.ds.m), (50, 26, 6))
        with self.assertRaises(ValidationError):
            grape_design('soil')

    def test_group_indicators(self):
        np.testing.assert_array_equal(group_indicators((2, 1)), [[1, 0], [1, 0], [0, 1]])


class SimulateTest(unittest.TestCase):
    def test_deterministic(self):
        spec = example2_spec('V2', seed=12)
        a, b = simulate(spec), simulate(spec)
        np.testing.assert_array_equal(a.ds.X, b.ds.X)
        self.assertEqual(a.truth_dict(), b.truth_dict())

    def test_seeds_differ(self):
        a = simulate(example2_spec('V0', seed=1)).ds.X
        b = simulate(example2_spec('V0', seed=2)).ds.X
        self.assertFalse(np.array_equal(a, b))

    def test_derive_seed(self):
        self.assertEqual(derive_seed(7, 3, 1), derive_seed(7, 3, 1))
        self.assertNotEqual(derive_seed(7, 3, 1), derive_seed(7, 3, 2))
        self.assertNotEqual(derive_seed(7, 3, 1), derive_seed(8, 3, 1))

    def test_cyclic_graph(self):
        spec = SimSpec(graph=Dag(2, {(0, 1), (1, 0)}), Q=np.ones((5, 1)), V_true=np.eye(1))
        with self.assertRaises(CycleError):
            simulate(spec)

    def test_spec_validation(self):
        with self.assertRaises(ValidationError):
            example2_spec('V0', seed=-5)
        with self.assertRaises(ValidationError):
            derive_seed(-1, 0)
        with self.assertRaises(ValidationError):
            SimSpec(graph=Dag.empty(2), Q=np.eye(2), V_true=np.eye(2))

    def test_empty_graph_variances(self):
        n = 500
        spec = SimSpec(graph=Dag.empty(3), Q=np.zeros((n, 0)), V_true=np.zeros((0, 0)), seed=3)
        out = simulate(spec)
        for i in range(3):
            ratio = np.var(out.ds.X[:, i], ddof=1) / out.truth['psi'][i]
            self.assertLess(abs(ratio - 1.0), 0.2)

    def test_edge_coefficient_recovered(self):
        n = 2000
        spec = SimSpec(graph=Dag(2, {(0, 1)}), Q=np.zeros((n, 0)), V_true=np.zeros((0, 0)), seed=8)
        out = simulate(spec)
        x0, x1 = out.ds.X[:, 0], out.ds.X[:, 1]
        coef = (x0 @ x1) / (x0 @ x0)
        resid = x1 - coef * x0
        se = np.sqrt(resid @ resid / (n - 1) / (x0 @ x0))
        self.assertLess(abs(coef - out.truth['gamma'][(0, 1)]), 3 * se)

    def test_effect_scale_follows_upsilon(self):
        loose = simulate(example1_spec(5, 1.0, seed=21)).truth['b']
        tight = simulate(example1_spec(5, 100.0, seed=21)).truth['b']
        for i in loose:
            np.testing.assert_allclose(loose[i] / tight[i], 10.0, rtol=1e-9)

    def test_residual_variance_matches_psi(self):
        ratios = []
        for seed in range(20):
            spec = example1_spec(1000, 1.0, seed=seed)
            out = simulate(spec)
            X, Q = out.ds.X, out.ds.Q
            for i in range(spec.p):
                design = np.column_stack([X[:, list(spec.graph.parents(i))], Q])
                coef, *_ = np.linalg.lstsq(design, X[:, i], rcond=None)
                resid = X[:, i] - design @ coef
                ratios.append((resid @ resid) / (spec.n - design.shape[1]) / out.truth['psi'][i])
        self.assertLess(abs(np.median(ratios) - 1.0), 0.15)


if __name__ == '__main__':
    unittest.main()
