import unittest
import numpy as np
from conf import *
import graph_core
from graph_core import FeatureMatrix, Graph


def _points(*xs):
    return FeatureMatrix([[x] for x in xs], ['n%i' % i for i in range(len(xs))])


class TestPairwiseDistance(unittest.TestCase):

    def test_three_four_five(self):
        self.assertEqual(graph_core.pairwise_distance((0, 0), (3, 4)), 5.0)

    def test_identity(self):
        x = np.array([0.3, -1.2, 7.0])
        self.assertEqual(graph_core.pairwise_distance(x, x), 0.0)

    def test_hand_arithmetic(self):
        self.assertAlmostEqual(
            graph_core.pairwise_distance((1, 2, 3), (4, 6, 3)), 5.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(StructuralError):
            graph_core.pairwise_distance((1, 2), (1, 2, 3))


class TestFeatureMatrix(unittest.TestCase):

    def test_rejects_nan(self):
        with self.assertRaises(StructuralError):
            FeatureMatrix([[0.0], [np.nan]], ['a', 'b'])

    def test_rejects_duplicate_ids(self):
        with self.assertRaises(StructuralError):
            FeatureMatrix([[0.0], [1.0]], ['a', 'a'])

    def test_rejects_single_row(self):
        with self.assertRaises(StructuralError):
            FeatureMatrix([[0.0]], ['a'])

    def test_take(self):
        X = _points(0, 1, 2)
        Y = X.take([2, 0])
        self.assertEqual(Y.node_ids, ('n2', 'n0'))
        self.assertEqual(Y.data[:, 0].tolist(), [2.0, 0.0])


class TestKnnEdges(unittest.TestCase):

    def test_collinear_union(self):
        E = graph_core.knn_edges(_points(0, 1, 10), 1)
        self.assertEqual(E.pairs(), {(0, 1), (1, 2)})

    def test_two_nodes(self):
        E = graph_core.knn_edges(_points(0, 5), 1)
        self.assertEqual(E.pairs(), {(0, 1)})
        self.assertEqual(E.dists.tolist(), [5.0])

    def test_k_too_large(self):
        with self.assertRaises(ParameterError):
            graph_core.knn_edges(_points(0, 1, 2), 3)

    def test_minimum_degree_and_symmetry(self):
        rng = np.random.default_rng(3)
        X = FeatureMatrix(rng.standard_normal((40, 4)),
                          ['n%i' % i for i in range(40)])
        E = graph_core.knn_edges(X, 5, chunk_size=7)
        self.assertTrue(np.all(E.rows < E.cols))
        deg = np.bincount(np.concatenate([E.rows, E.cols]), minlength=40)
        self.assertTrue(np.all(deg >= 5))
        # chunking does not change the result
        self.assertEqual(E.pairs(), graph_core.knn_edges(X, 5).pairs())

    def test_relabeling_nodes_relabels_edges(self):
        rng = np.random.default_rng(17)
        for n, k in ((12, 1), (30, 4), (45, 7)):
            data = rng.standard_normal((n, 3))
            perm = rng.permutation(n)
            ids = ['n%i' % i for i in range(n)]
            E = graph_core.knn_edges(FeatureMatrix(data, ids), k)
            # row r of the permuted matrix is node perm[r] of the original
            P = graph_core.knn_edges(FeatureMatrix(data[perm], ids), k)
            mapped = set(pair_to_tuple(int(perm[i]), int(perm[j]))
                         for i, j in P.pairs())
            self.assertEqual(mapped, E.pairs(), (n, k))

    def test_ties_go_to_smaller_index(self):
        # node 1 is equidistant from 0 and 2
        E = graph_core.knn_edges(_points(0, 1, 2), 1)
        self.assertIn((0, 1), E.pairs())
        self.assertNotIn((0, 2), E.pairs())


class TestEstimateSigma(unittest.TestCase):

    def test_triangle(self):
        X = _points(0, 1, 2)
        E = graph_core.EdgeSet(3, [0, 1, 0], [1, 2, 2], [1, 1, 2])
        bw = graph_core.estimate_sigma(X, E)
        self.assertAlmostEqual(bw.sigma, 2.0 / 3)
        self.assertEqual(bw.edge_count, 3)

    def test_single_edge(self):
        X = _points(0, 2)
        E = graph_core.knn_edges(X, 1)
        self.assertAlmostEqual(graph_core.estimate_sigma(X, E).sigma, 2.0 / 3)

    def test_directed_counting(self):
        X = _points(0, 2)
        E = graph_core.knn_edges(X, 1)
        bw = graph_core.estimate_sigma(X, E, counting='directed')
        self.assertAlmostEqual(bw.sigma, 4.0 / 4)

    def test_equal_distances(self):
        X = _points(0, 1, 2, 3)
        E = graph_core.EdgeSet(4, [0, 1, 2], [1, 2, 3], [1, 1, 1])
        self.assertAlmostEqual(graph_core.estimate_sigma(X, E).sigma,
                               1.0 * 3 / (3 + 4))

    def test_all_zero(self):
        X = _points(1, 1)
        E = graph_core.knn_edges(X, 1)
        with self.assertRaises(DegenerateInputError):
            graph_core.estimate_sigma(X, E)


class TestGaussianWeights(unittest.TestCase):

    def _weight(self, d, sigma):
        E = graph_core.EdgeSet(2, [0], [1], [d])
        return graph_core.gaussian_weights(E, sigma).weights[0]

    def test_unit_distance(self):
        self.assertAlmostEqual(self._weight(0.5, 0.5), np.exp(-1))

    def test_zero_distance(self):
        self.assertEqual(self._weight(0.0, 1.0), 1.0)

    def test_far_edge(self):
        self.assertAlmostEqual(self._weight(2.0, 2.0 / 3), np.exp(-9),
                               delta=1e-12)

    def test_underflow_floored(self):
        self.assertGreater(self._weight(1e3, 1.0), 0.0)

    def test_bad_sigma(self):
        with self.assertRaises(ParameterError):
            self._weight(1.0, 0.0)


class TestGraph(unittest.TestCase):

    def test_rejects_self_loop(self):
        with self.assertRaises(StructuralError):
            Graph(2, [0], [0], [1.0])

    def test_rejects_reversed_edge(self):
        with self.assertRaises(StructuralError):
            Graph(2, [1], [0], [1.0])

    def test_rejects_duplicate(self):
        with self.assertRaises(StructuralError):
            Graph(3, [0, 0], [1, 1], [1.0, 2.0])

    def test_rejects_nonpositive_weight(self):
        with self.assertRaises(StructuralError):
            Graph(2, [0], [1], [0.0])

    def test_degree(self):
        G = Graph(3, [0, 1], [1, 2], [1.0, 2.0])
        self.assertEqual(G.degree.tolist(), [1.0, 3.0, 2.0])


class TestLaplacian(unittest.TestCase):

    def test_p2(self):
        L = graph_core.build_laplacian(Graph(2, [0], [1], [1.0]))
        self.assertEqual(L.dense().tolist(), [[1, -1], [-1, 1]])

    def test_p3(self):
        L = graph_core.build_laplacian(Graph(3, [0, 1], [1, 2], [1.0, 1.0]))
        self.assertEqual(L.dense().tolist(),
                         [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
        self.assertTrue(L.check())

    def test_triangle_spectrum(self):
        L = graph_core.build_laplacian(Graph(3, [0, 0, 1], [1, 2, 2],
                                             [1.0, 1.0, 1.0]))
        lam = np.linalg.eigvalsh(L.dense())
        np.testing.assert_allclose(lam, [0, 3, 3], atol=1e-12)

    def test_shifted(self):
        L = graph_core.build_laplacian(Graph(2, [0], [1], [1.0]))
        np.testing.assert_allclose(L.shifted(0.2).toarray(),
                                   [[1.2, -1], [-1, 1.2]])


class TestComponents(unittest.TestCase):

    def test_p3(self):
        comps = graph_core.connected_components(
            Graph(3, [0, 1], [1, 2], [1.0, 1.0]))
        self.assertEqual([c.tolist() for c in comps], [[0, 1, 2]])

    def test_two_edges(self):
        comps = graph_core.connected_components(
            Graph(4, [0, 2], [1, 3], [1.0, 1.0]))
        self.assertEqual([c.tolist() for c in comps], [[0, 1], [2, 3]])

    def test_isolated_node(self):
        comps = graph_core.connected_components(Graph(3, [0], [1], [1.0]))
        self.assertEqual([c.tolist() for c in comps], [[0, 1], [2]])

    def _clusters(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((10, 2))
        b = rng.standard_normal((10, 2)) + 100
        return FeatureMatrix(np.vstack([a, b]),
                             ['n%i' % i for i in range(20)])

    def test_separated_clusters(self):
        X = self._clusters()
        E = graph_core.knn_edges(X, 2)
        G = graph_core.gaussian_weights(E, graph_core.estimate_sigma(X, E))
        self.assertEqual(len(graph_core.connected_components(G)), 2)

    def test_connect_policy(self):
        X = self._clusters()
        G, bw, report = graph_core.build_graph(X, 2, policy='connect')
        self.assertEqual(report.n_components_before, 2)
        self.assertEqual(len(report.bridges), 1)
        self.assertEqual(len(graph_core.connected_components(G)), 1)
        i, j, _ = report.bridges[0]
        self.assertTrue(i < 10 <= j)

    def test_error_policy(self):
        with self.assertRaises(DegenerateInputError):
            graph_core.build_graph(self._clusters(), 2, policy='error')


class TestBuildGraph(unittest.TestCase):

    def test_k_capped(self):
        X = _points(0, 1, 3)
        G, _, report = graph_core.build_graph(X, 30)
        self.assertEqual(report.k, 2)
        self.assertEqual(G.n_edges, 3)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        X = FeatureMatrix(rng.standard_normal((30, 3)),
                          ['n%i' % i for i in range(30)])
        G1, _, _ = graph_core.build_graph(X, 4)
        G2, _, _ = graph_core.build_graph(X, 4)
        self.assertEqual(G1.rows.tolist(), G2.rows.tolist())
        self.assertEqual(G1.weights.tolist(), G2.weights.tolist())


if __name__ == '__main__':
    unittest.main()
