import unittest
import numpy as np
from scipy import sparse
from conf import *
import graph_core
import linsolve
import synthetic


class TestBlockCG(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(8)
        G = synthetic.random_connected_graph(40, rng)
        self.A = graph_core.build_laplacian(G).shifted(0.2)
        self.B = rng.standard_normal((40, 3))

    def test_matches_dense_solve(self):
        X, info = linsolve.block_cg(self.A, self.B, tol=1e-12)
        expected = np.linalg.solve(self.A.toarray(), self.B)
        np.testing.assert_allclose(X, expected, atol=1e-9)
        self.assertTrue(np.all(info.residuals <= 1e-12))

    def test_vector_rhs(self):
        x, _ = linsolve.block_cg(self.A, self.B[:, 0])
        self.assertEqual(x.shape, (40,))
        np.testing.assert_allclose(self.A @ x, self.B[:, 0], atol=1e-8)

    def test_zero_column(self):
        B = self.B.copy()
        B[:, 1] = 0
        X, _ = linsolve.block_cg(self.A, B)
        np.testing.assert_array_equal(X[:, 1], 0)

    def test_without_preconditioner(self):
        X, _ = linsolve.block_cg(self.A, self.B, precondition=False)
        np.testing.assert_allclose(self.A @ X, self.B, atol=1e-8)

    def test_no_convergence(self):
        with self.assertRaises(ConvergenceError) as ctx:
            linsolve.block_cg(self.A, self.B, tol=1e-14, max_iter=1)
        self.assertEqual(ctx.exception.iterations, 1)
        self.assertGreater(ctx.exception.residual, 1e-14)

    def test_bad_shape(self):
        with self.assertRaises(ParameterError):
            linsolve.block_cg(self.A, np.ones(3))

    def test_power(self):
        X, _ = linsolve.block_cg_power(self.A, self.B, 2, tol=1e-12)
        Ainv = np.linalg.inv(self.A.toarray())
        np.testing.assert_allclose(X, Ainv @ Ainv @ self.B, atol=1e-8)

    def test_fractional_power_rejected(self):
        with self.assertRaises(ParameterError):
            linsolve.block_cg_power(self.A, self.B, 1.5)

    def test_jacobi(self):
        A = sparse.diags([2.0, 0.0, 4.0])
        self.assertEqual(linsolve.jacobi(A).tolist(), [0.5, 1.0, 0.25])


if __name__ == '__main__':
    unittest.main()
