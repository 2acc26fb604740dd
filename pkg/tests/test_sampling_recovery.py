import unittest
import numpy as np
from conf import *
import graph_core
import sampling_recovery
import spectral
import synthetic
from graph_core import Graph
from sampling_recovery import SamplingSet


def _lap(n, rows, cols):
    return graph_core.build_laplacian(Graph(n, rows, cols, [1.0] * len(rows)))


P3 = _lap(3, [0, 1], [1, 2])
# path 0-1-2-3 with an extra leaf 4 on node 2: nodes 3 and 4 are twins
TWINS = _lap(5, [0, 1, 2, 2], [1, 2, 3, 4])


class TestSamplingSet(unittest.TestCase):

    def test_order_kept(self):
        S = SamplingSet([2, 0], 3)
        self.assertEqual(S.indices.tolist(), [2, 0])
        self.assertEqual(S.matrix().toarray().tolist(),
                         [[0, 0, 1], [1, 0, 0]])
        self.assertEqual(S.mask().tolist(), [True, False, True])

    def test_invalid(self):
        for idx in ([], [0, 0], [3], [-1]):
            with self.assertRaises(StructuralError):
                SamplingSet(idx, 3)


class TestDecimate(unittest.TestCase):

    def test_single(self):
        self.assertEqual(sampling_recovery.decimate(
            [4, 5, 6], SamplingSet([2], 3)).tolist(), [6])

    def test_all_nodes(self):
        self.assertEqual(sampling_recovery.decimate(
            [4, 5, 6], SamplingSet([0, 1, 2], 3)).tolist(), [4, 5, 6])

    def test_follows_order(self):
        self.assertEqual(sampling_recovery.decimate(
            [1, 2, 3], SamplingSet([2, 0], 3)).tolist(), [3, 1])

    def test_length_mismatch(self):
        with self.assertRaises(StructuralError):
            sampling_recovery.decimate([1, 2], SamplingSet([0], 3))


class TestRank(unittest.TestCase):

    def test_too_few_samples(self):
        basis = spectral.eigendecompose(P3)
        ok, smin = sampling_recovery.verify_sampling_rank(
            basis, SamplingSet([0], 3), 2)
        self.assertFalse(ok)
        self.assertEqual(smin, 0.0)

    def test_all_nodes(self):
        basis = spectral.eigendecompose(P3)
        for rho in (1, 2, 3):
            ok, _ = sampling_recovery.verify_sampling_rank(
                basis, SamplingSet([0, 1, 2], 3), rho)
            self.assertTrue(ok)

    def test_twins_are_indistinguishable(self):
        basis = spectral.eigendecompose(TWINS)
        ok, smin = sampling_recovery.verify_sampling_rank(
            basis, SamplingSet([3, 4], 5), 2)
        self.assertFalse(ok)
        self.assertLess(smin, 1e-10)
        with self.assertRaises(RecoveryError):
            sampling_recovery.chen_recover(basis, SamplingSet([3, 4], 5),
                                           [1.0, 1.0], 2)


class TestChenRecover(unittest.TestCase):

    def setUp(self):
        self.basis = spectral.eigendecompose(P3)
        self.U = self.basis.eigenvectors

    def test_constant_from_one_sample(self):
        for s in range(3):
            S = SamplingSet([s], 3)
            y = sampling_recovery.chen_recover(self.basis, S, [2.5], 1)
            np.testing.assert_allclose(y, 2.5, atol=1e-12)

    def test_two_band_signal(self):
        y = 2 * self.U[:, 0] + 3 * self.U[:, 1]
        S = SamplingSet([0, 2], 3)
        y_hat = sampling_recovery.chen_recover(
            self.basis, S, sampling_recovery.decimate(y, S), 2)
        np.testing.assert_allclose(y_hat, y, atol=1e-8)

    def test_not_bandlimited(self):
        y = self.U[:, 2]
        S = SamplingSet([0, 2], 3)
        y_hat = sampling_recovery.chen_recover(
            self.basis, S, sampling_recovery.decimate(y, S), 2)
        self.assertGreater(np.linalg.norm(y_hat - y), 1e-3)

    def test_random_instances(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            n = int(rng.integers(3, 30))
            lap = graph_core.build_laplacian(
                synthetic.random_connected_graph(n, rng))
            basis = spectral.eigendecompose(lap)
            rho = int(rng.integers(1, n // 2 + 1))
            y = spectral.project_bandlimited(basis, rng.standard_normal(n), rho)
            S = SamplingSet(np.arange(n), n)
            y_hat = sampling_recovery.chen_recover(
                basis, S, sampling_recovery.decimate(y, S), rho)
            self.assertLessEqual(np.linalg.norm(y_hat - y),
                                 1e-8 * np.linalg.norm(y))

    def test_least_squares_reports_rank(self):
        basis = spectral.eigendecompose(TWINS)
        _, rank = sampling_recovery.least_squares_recover(
            basis, SamplingSet([3, 4], 5), [1.0, 1.0], 2)
        self.assertEqual(rank, 1)


class TestPuyRecover(unittest.TestCase):

    def test_data_term_dominates(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal(3)
        S = SamplingSet([0, 1, 2], 3)
        y_hat = sampling_recovery.puy_recover(P3, S, y, eta=1e-12)
        np.testing.assert_allclose(y_hat, y, atol=1e-6)

    def test_constant_signal(self):
        for eta in (1e-3, 0.2, 10.0):
            S = SamplingSet([1], 3)
            y_hat = sampling_recovery.puy_recover(P3, S, [4.0], eta=eta)
            np.testing.assert_allclose(y_hat, 4.0, atol=1e-10)

    def test_minimizes_objective(self):
        rng = np.random.default_rng(4)
        S = SamplingSet([0, 2], 3)
        y_S = np.array([1.0, -1.0])
        z = sampling_recovery.puy_recover(P3, S, y_S, 0.5, (0.1, 1.0, 0.5))
        best = sampling_recovery.puy_objective(P3, S, y_S, z, 0.5,
                                               (0.1, 1.0, 0.5))
        for _ in range(50):
            other = z + 0.1 * rng.standard_normal(3)
            self.assertGreater(sampling_recovery.puy_objective(
                P3, S, y_S, other, 0.5, (0.1, 1.0, 0.5)), best)

    def test_weights(self):
        S = SamplingSet([0, 2], 3)
        with self.assertRaises(ParameterError):
            sampling_recovery.puy_recover(P3, S, [1, 2], P_diag=[1, 0])
        with self.assertRaises(StructuralError):
            sampling_recovery.puy_recover(P3, S, [1, 2], P_diag=[1])
        with self.assertRaises(ParameterError):
            sampling_recovery.puy_recover(P3, S, [1, 2], eta=0)

    def test_negative_coefficient(self):
        with self.assertRaises(ParameterError):
            sampling_recovery.polynomial_of(P3, (1.0, -1.0))

    def test_polynomial(self):
        g = sampling_recovery.polynomial_of(P3, (1.0, 0.0, 2.0)).toarray()
        L = P3.dense()
        np.testing.assert_allclose(g, np.eye(3) + 2 * L @ L)


class TestRecoveryOperator(unittest.TestCase):

    def test_dispatch(self):
        basis = spectral.eigendecompose(P3)
        S = SamplingSet([0, 2], 3)
        y = 2 * basis.eigenvectors[:, 0] + 3 * basis.eigenvectors[:, 1]
        y_S = sampling_recovery.decimate(y, S)
        for kind in ('chen-exact', 'least-squares'):
            op = sampling_recovery.RecoveryOperator(kind, rho=2)
            np.testing.assert_allclose(op.apply(S, y_S, basis=basis), y,
                                       atol=1e-8)
        op = sampling_recovery.RecoveryOperator('puy-regularized', eta=0.2)
        self.assertEqual(op.apply(S, y_S, lap=P3).shape, (3,))

    def test_needs_rho(self):
        with self.assertRaises(ParameterError):
            sampling_recovery.RecoveryOperator('chen-exact')
        with self.assertRaises(ParameterError):
            sampling_recovery.RecoveryOperator('magic', rho=1)


class TestSampleUniform(unittest.TestCase):

    def test_size_and_determinism(self):
        S = sampling_recovery.sample_uniform(100, 0.1, 7)
        self.assertEqual(S.m, 10)
        self.assertEqual(S.indices.tolist(), sorted(S.indices.tolist()))
        self.assertEqual(S.indices.tolist(),
                         sampling_recovery.sample_uniform(100, 0.1, 7)
                         .indices.tolist())

    def test_rounds_up(self):
        self.assertEqual(sampling_recovery.sample_uniform(10, 0.01, 0).m, 1)
        self.assertEqual(sampling_recovery.sample_uniform(10, 1.0, 0).m, 10)

    def test_bad_density(self):
        with self.assertRaises(ParameterError):
            sampling_recovery.sample_uniform(10, 0.0, 0)


if __name__ == '__main__':
    unittest.main()
