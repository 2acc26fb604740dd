import os
import shutil
import tempfile
import unittest
import numpy as np
from conf import *
import graph_core
import spectral
import synthetic
from graph_core import Graph


def _lap(n, rows, cols, weights=None):
    if weights is None:
        weights = [1.0] * len(rows)
    return graph_core.build_laplacian(Graph(n, rows, cols, weights))


def _complete(n):
    iu, ju = np.triu_indices(n, 1)
    return _lap(n, iu, ju)


P2 = _lap(2, [0], [1])
P3 = _lap(3, [0, 1], [1, 2])


class TestEigendecompose(unittest.TestCase):

    def test_p2(self):
        b = spectral.eigendecompose(P2)
        np.testing.assert_allclose(b.eigenvalues, [0, 2], atol=1e-12)
        np.testing.assert_allclose(b.eigenvectors[:, 0],
                                   np.ones(2) / np.sqrt(2), atol=1e-12)

    def test_p3(self):
        b = spectral.eigendecompose(P3)
        np.testing.assert_allclose(b.eigenvalues, [0, 1, 3], atol=1e-12)

    def test_complete_graphs(self):
        for n in range(2, 11):
            b = spectral.eigendecompose(_complete(n))
            np.testing.assert_allclose(b.eigenvalues,
                                       [0] + [n] * (n - 1), atol=1e-10)

    def test_invariants_on_random_graphs(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            lap = graph_core.build_laplacian(
                synthetic.random_connected_graph(int(rng.integers(2, 25)), rng))
            b = spectral.eigendecompose(lap)
            self.assertLess(abs(b.eigenvalues[0]), 1e-8)
            self.assertTrue(np.all(np.diff(b.eigenvalues) >= 0))
            self.assertLess(b.orthonormality_error(), 1e-8)
            self.assertLess(b.reconstruction_error(lap), 1e-8)
            L = lap.dense()
            for i in range(b.n):
                u = b.eigenvectors[:, i]
                self.assertAlmostEqual(u @ L @ u, b.eigenvalues[i], delta=1e-8)

    def test_zero_eigenvalues_count_components(self):
        rng = np.random.default_rng(5)
        for n_blocks in (1, 2, 3, 4):
            rows, cols, ws, offset = [], [], [], 0
            for _ in range(n_blocks):
                g = synthetic.random_connected_graph(int(rng.integers(2, 10)),
                                                     rng)
                rows.extend((g.rows + offset).tolist())
                cols.extend((g.cols + offset).tolist())
                ws.extend(g.weights.tolist())
                offset += g.n_nodes
            n_isolated = n_blocks - 1
            G = Graph(offset + n_isolated, rows, cols, ws)
            b = spectral.eigendecompose(graph_core.build_laplacian(G))
            n_zero = int(np.sum(np.abs(b.eigenvalues) < 1e-8))
            self.assertEqual(n_zero, len(graph_core.connected_components(G)))
            self.assertEqual(n_zero, 2 * n_blocks - 1)

    def test_sign_convention(self):
        b = spectral.eigendecompose(P3)
        for c in range(3):
            u = b.eigenvectors[:, c]
            first = u[np.flatnonzero(np.abs(u) > 1e-12)[0]]
            self.assertGreater(first, 0)

    def test_limit(self):
        with self.assertRaises(CapabilityError):
            spectral.eigendecompose(P3, limit=2)


class TestTransforms(unittest.TestCase):

    def setUp(self):
        self.basis = spectral.eigendecompose(P3)

    def test_constant_signal(self):
        yhat = spectral.gft(self.basis, 2.5 * np.ones(3))
        np.testing.assert_allclose(yhat[1:], 0, atol=1e-10)
        self.assertAlmostEqual(abs(yhat[0]), 2.5 * np.sqrt(3), delta=1e-10)

    def test_eigenvector_to_unit(self):
        for j in range(3):
            yhat = spectral.gft(self.basis, self.basis.eigenvectors[:, j])
            np.testing.assert_allclose(yhat, np.eye(3)[j], atol=1e-12)

    def test_parseval_and_round_trip(self):
        rng = np.random.default_rng(2)
        y = rng.standard_normal(3)
        yhat = spectral.gft(self.basis, y)
        self.assertAlmostEqual(np.linalg.norm(yhat), np.linalg.norm(y),
                               delta=1e-10)
        np.testing.assert_allclose(spectral.igft(self.basis, yhat), y,
                                   atol=1e-10)

    def test_inverse_of_zero_and_unit(self):
        np.testing.assert_array_equal(spectral.igft(self.basis, np.zeros(3)),
                                      np.zeros(3))
        np.testing.assert_allclose(spectral.igft(self.basis, np.eye(3)[0]),
                                   self.basis.eigenvectors[:, 0])

    def test_length_mismatch(self):
        with self.assertRaises(StructuralError):
            spectral.gft(self.basis, np.ones(4))


class TestBandlimited(unittest.TestCase):

    def setUp(self):
        self.basis = spectral.eigendecompose(P3)
        self.rng = np.random.default_rng(4)

    def test_full_bandwidth_is_identity(self):
        y = self.rng.standard_normal(3)
        np.testing.assert_allclose(
            spectral.project_bandlimited(self.basis, y, 3), y, atol=1e-12)

    def test_rho_one_gives_mean(self):
        y = self.rng.standard_normal(3)
        np.testing.assert_allclose(
            spectral.project_bandlimited(self.basis, y, 1),
            np.mean(y) * np.ones(3), atol=1e-12)

    def test_idempotent(self):
        y = self.rng.standard_normal(3)
        p = spectral.project_bandlimited(self.basis, y, 2)
        np.testing.assert_allclose(
            spectral.project_bandlimited(self.basis, p, 2), p, atol=1e-12)
        self.assertTrue(spectral.is_bandlimited(self.basis, p, 2))

    def test_is_bandlimited(self):
        self.assertTrue(spectral.is_bandlimited(
            self.basis, self.rng.standard_normal(3), 3))
        self.assertFalse(spectral.is_bandlimited(
            self.basis, self.basis.eigenvectors[:, 2], 2))

    def test_bad_rho(self):
        with self.assertRaises(ParameterError):
            self.basis.leading(0)
        with self.assertRaises(ParameterError):
            spectral.project_bandlimited(self.basis, np.ones(3), 4)

    def test_cutoff_frequency(self):
        spec = spectral.BandlimitedSpec.from_basis(self.basis, 2)
        self.assertEqual(spec.rho, 2)
        self.assertAlmostEqual(spec.omega, 1.0)


class TestSpectralFunction(unittest.TestCase):

    def test_shifted_inverse(self):
        basis = spectral.eigendecompose(P3)
        K = spectral.spectral_function(basis, lambda lam: 1.0 / (lam + 0.2))
        np.testing.assert_allclose(K, np.linalg.inv(P3.dense() + 0.2 * np.eye(3)),
                                   atol=1e-10)


class TestSpectrumCsv(unittest.TestCase):

    def test_write(self):
        d = tempfile.mkdtemp()
        try:
            path = os.path.join(d, 'spectrum.csv')
            spectral.write_spectrum_csv(spectral.eigendecompose(P3), path,
                                        with_vectors=True)
            with open(path) as f:
                lines = f.read().splitlines()
            self.assertEqual(lines[0], 'index,eigenvalue,u_0,u_1,u_2')
            self.assertEqual(len(lines), 4)
            self.assertAlmostEqual(float(lines[3].split(',')[1]), 3.0)
        finally:
            shutil.rmtree(d)


if __name__ == '__main__':
    unittest.main()
