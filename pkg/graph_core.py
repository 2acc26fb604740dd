"""
Builds, stores and validates the undirected weighted instance graph and its
combinatorial Laplacian from the node feature vectors.

The pipeline is:
    FeatureMatrix --knn_edges--> EdgeSet --estimate_sigma--> KernelBandwidth
                  --gaussian_weights--> Graph --build_laplacian--> LaplacianView

Every undirected edge is stored once, as (i, j) with i < j, sorted
lexicographically; the symmetric adjacency matrix is derived from that list on
demand. Graph and LaplacianView are immutable once built (their arrays are
read-only), so they can be shared by concurrent solves.
"""

import collections
import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial.distance import cdist
from conf import *
import statemon

_log = logger.setup_logger(__name__)

statemon.define('n_edges_built', int)
statemon.define('n_components_bridged', int)
statemon.define('n_zero_distance_edges', int)

KernelBandwidth = collections.namedtuple(
    'KernelBandwidth', ['sigma', 'edge_count', 'node_count'])

ConnectivityReport = collections.namedtuple(
    'ConnectivityReport', ['k', 'n_components_before', 'component_sizes',
                           'bridges', 'sigma'])


class FeatureMatrix(object):
    """
    The N x M matrix of instance feature vectors, one row per node, plus the
    opaque node identifiers and (optionally) the feature layout descriptor
    the rows were computed with.
    """
    def __init__(self, data, node_ids, layout=None):
        """
        :param data: An N x M array-like of finite reals.
        :param node_ids: N unique identifiers (strings).
        :param layout: Optional dict describing the feature layout; recorded
                       in the feature file.
        """
        data = np.array(data, dtype=np.float64)
        if data.ndim != 2:
            raise StructuralError('Feature matrix must be 2-D, got shape %s'
                                  % (data.shape,))
        n, m = data.shape
        if n < 2:
            raise StructuralError('Need at least 2 instances, got %i' % n)
        if m < 1:
            raise StructuralError('Need at least 1 feature column')
        if not np.all(np.isfinite(data)):
            raise StructuralError('Feature matrix contains NaN or Inf')
        node_ids = [str(x) for x in node_ids]
        if len(node_ids) != n:
            raise StructuralError('%i node ids for %i rows' % (len(node_ids), n))
        if len(set(node_ids)) != n:
            raise StructuralError('Node ids are not unique')
        self.data = frozen(data)
        self.node_ids = tuple(node_ids)
        self.layout = layout

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def m(self):
        return self.data.shape[1]

    def take(self, rows):
        """
        :return: A new FeatureMatrix with only the given rows, in that order.
        """
        rows = np.asarray(rows, dtype=int)
        return FeatureMatrix(self.data[rows], [self.node_ids[i] for i in rows],
                             self.layout)


class EdgeSet(object):
    """
    An undirected edge set over n_nodes nodes, each pair stored once with
    i < j, together with the Euclidean length of every edge.
    """
    def __init__(self, n_nodes, rows, cols, dists):
        self.n_nodes = int(n_nodes)
        self.rows = frozen(np.asarray(rows, dtype=np.int64))
        self.cols = frozen(np.asarray(cols, dtype=np.int64))
        self.dists = frozen(np.asarray(dists, dtype=np.float64))

    def __len__(self):
        return len(self.rows)

    def pairs(self):
        """
        :return: The edges as a set of (i, j) tuples with i < j.
        """
        return set(zip(self.rows.tolist(), self.cols.tolist()))


class Graph(object):
    """
    An undirected weighted graph without self-loops. The edge list is the
    source of truth; adjacency and degree are derived from it.
    """
    def __init__(self, n_nodes, rows, cols, weights, validate=True):
        """
        :param n_nodes: The number of nodes N.
        :param rows: First endpoints, with rows < cols.
        :param cols: Second endpoints.
        :param weights: Strictly positive, finite edge weights.
        :param validate: Whether to check the invariants on construction.
        """
        self.n_nodes = int(n_nodes)
        self.rows = frozen(np.asarray(rows, dtype=np.int64))
        self.cols = frozen(np.asarray(cols, dtype=np.int64))
        self.weights = frozen(np.asarray(weights, dtype=np.float64))
        self._adjacency = None
        deg = (np.bincount(self.rows, self.weights, minlength=self.n_nodes) +
               np.bincount(self.cols, self.weights, minlength=self.n_nodes))
        self.degree = frozen(deg)
        if validate:
            self.validate()

    @property
    def n_edges(self):
        return len(self.rows)

    def validate(self):
        """
        Checks the Graph invariants: each edge stored once as i < j, indices
        in range, no self-loops, weights strictly positive and finite, degree
        equal to the incident weight sums.

        :raises StructuralError: on the first violated invariant.
        """
        n = self.n_nodes
        if not (len(self.rows) == len(self.cols) == len(self.weights)):
            raise StructuralError('Edge arrays have different lengths')
        if n < 1:
            raise StructuralError('A graph needs at least one node')
        if len(self.rows):
            if self.rows.min() < 0 or self.cols.max() >= n:
                raise StructuralError('Edge endpoint out of range [0, %i)' % n)
            if np.any(self.rows == self.cols):
                raise StructuralError('Self-loops are not allowed')
            if np.any(self.rows > self.cols):
                raise StructuralError('Edges must be stored once as i < j')
            keys = self.rows * n + self.cols
            if len(np.unique(keys)) != len(keys):
                raise StructuralError('Duplicate edges')
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise StructuralError('Edge weights must be positive and finite')
        recomputed = self.adjacency.sum(axis=1).A1
        if not np.allclose(recomputed, self.degree, rtol=1e-12, atol=0):
            raise StructuralError('Degree does not match the adjacency')

    @property
    def adjacency(self):
        """
        :return: The symmetric N x N weight matrix W as a CSR matrix.
        """
        if self._adjacency is None:
            n = self.n_nodes
            r = np.concatenate([self.rows, self.cols])
            c = np.concatenate([self.cols, self.rows])
            w = np.concatenate([self.weights, self.weights])
            self._adjacency = sparse.csr_matrix((w, (r, c)), shape=(n, n))
        return self._adjacency

    def with_edges(self, rows, cols, weights):
        """
        :return: A new Graph with the given extra edges (which must not
                 already exist).
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
        r = np.concatenate([self.rows, lo])
        c = np.concatenate([self.cols, hi])
        w = np.concatenate([self.weights, np.asarray(weights, dtype=float)])
        order = np.lexsort((c, r))
        return Graph(self.n_nodes, r[order], c[order], w[order])


class LaplacianView(object):
    """
    The combinatorial Laplacian L = D - W of a Graph.
    """
    def __init__(self, graph):
        self.source = graph
        self.form = 'combinatorial'
        W = graph.adjacency
        L = sparse.diags(graph.degree) - W
        self.matrix = L.tocsr()
        self.matrix.sort_indices()

    @property
    def n(self):
        return self.source.n_nodes

    def dense(self):
        return self.matrix.toarray()

    def shifted(self, epsilon):
        """
        :return: L + epsilon I, as a CSR matrix.
        """
        return (self.matrix + epsilon * sparse.identity(self.n,
                                                        format='csr')).tocsr()

    def check(self, n_vectors=8, seed=0):
        """
        Checks the Laplacian invariants: symmetric, zero row sums (relative
        1e-10) and x^T L x >= -1e-10 ||x||^2 on random vectors.

        :return: True if every check passes.
        """
        L = self.matrix
        scale = max(1.0, float(np.max(self.source.degree)))
        asym = abs(L - L.T).max() if L.nnz else 0.0
        if asym > 1e-12 * scale:
            return False
        if np.max(np.abs(L.sum(axis=1).A1)) > 1e-10 * scale:
            return False
        rng = np.random.default_rng(seed)
        for _ in range(n_vectors):
            x = rng.standard_normal(self.n)
            if x @ (L @ x) < -1e-10 * (x @ x) * scale:
                return False
        return True


def pairwise_distance(a, b):
    """
    The Euclidean distance between two feature vectors.

    :raises StructuralError: on a dimension mismatch or non-finite entries.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise StructuralError('Dimension mismatch: %i vs %i'
                              % (a.size, b.size))
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise StructuralError('Feature vectors must be finite')
    return float(np.sqrt(np.sum((a - b) ** 2)))


def _edge_distances(data, rows, cols):
    diff = data[rows] - data[cols]
    return np.sqrt(np.einsum('ij,ij->i', diff, diff))


def _nearest(row, k):
    """
    The indices of the k smallest entries of row, ties broken toward the
    smaller index.
    """
    kth = np.partition(row, k - 1)[k - 1]
    cand = np.flatnonzero(row <= kth)
    return cand[np.argsort(row[cand], kind='stable')[:k]]


def knn_edges(X, k=DEF_K, chunk_size=KNN_CHUNK_SIZE):
    """
    Connects every node to its k nearest neighbours (Euclidean, ties broken
    by the smaller node index), then symmetrizes by union: (i, j) is an edge
    if j is among i's neighbours OR i is among j's.

    :param X: A FeatureMatrix.
    :param k: The number of neighbours, 1 <= k < N.
    :param chunk_size: Query rows per block of the distance matrix.
    :return: An EdgeSet.
    """
    n = X.n
    if k is None:
        k = DEF_K
    if k < 1 or k >= n:
        raise ParameterError('k must satisfy 1 <= k < N (k=%r, N=%i)' % (k, n))
    data = X.data
    src = np.empty(n * k, dtype=np.int64)
    dst = np.empty(n * k, dtype=np.int64)
    for start, stop in blocks(n, chunk_size):
        D = cdist(data[start:stop], data, 'euclidean')
        D[np.arange(stop - start), np.arange(start, stop)] = np.inf
        for r in range(stop - start):
            i = start + r
            src[i * k:(i + 1) * k] = i
            dst[i * k:(i + 1) * k] = _nearest(D[r], k)
    rows, cols = canonical_edges(src, dst)
    dists = _edge_distances(data, rows, cols)
    _log.debug('%i undirected edges from k=%i over %i nodes'
               % (len(rows), k, n))
    return EdgeSet(n, rows, cols, dists)


def estimate_sigma(X, E, counting=SIGMA_EDGE_COUNTING):
    """
    Estimates the Gaussian kernel bandwidth as the summed edge length over
    (|E| + N).

    :param X: The FeatureMatrix the edges were built on.
    :param E: A nonempty EdgeSet.
    :param counting: 'undirected' counts every pair once; 'directed' counts
                     both orientations, i.e. sigma = 2 sum(d) / (2|E| + N).
    :return: A KernelBandwidth.
    :raises DegenerateInputError: if every edge has length zero.
    """
    if not len(E):
        raise ParameterError('Cannot estimate sigma on an empty edge set')
    n = X.n
    d = _edge_distances(X.data, E.rows, E.cols)
    if counting == 'undirected':
        n_edges = len(E)
        total = float(np.sum(d))
    elif counting == 'directed':
        n_edges = 2 * len(E)
        total = 2.0 * float(np.sum(d))
    else:
        raise ParameterError('Unknown edge counting %r' % counting)
    sigma = total / (n_edges + n)
    if not sigma > 0:
        raise DegenerateInputError('All edge lengths are zero: the Gaussian '
                                   'weights are undefined')
    return KernelBandwidth(sigma, n_edges, n)


def kernel_weights(d, sigma):
    """
    w = exp(-d^2 / sigma^2), floored at the smallest positive normal float
    so that far edges keep a strictly positive weight.
    """
    w = np.exp(-(np.asarray(d, dtype=float) / sigma) ** 2)
    tiny = np.finfo(float).tiny
    if np.any(w < tiny):
        _log.warning('%i edge weights underflowed and were floored at %g'
                     % (int(np.sum(w < tiny)), tiny))
        w = np.maximum(w, tiny)
    return w


def gaussian_weights(E, sigma):
    """
    Weighs an edge set with the Gaussian kernel.

    :param E: An EdgeSet.
    :param sigma: The kernel bandwidth, > 0 (a float or a KernelBandwidth).
    :return: A Graph.
    """
    if isinstance(sigma, KernelBandwidth):
        sigma = sigma.sigma
    if not sigma > 0:
        raise ParameterError('sigma must be positive, got %r' % sigma)
    n_zero = int(np.sum(E.dists == 0))
    if n_zero:
        _log.warning('%i edges join identical feature vectors; they get '
                     'weight 1' % n_zero)
        statemon.state.increment('n_zero_distance_edges', n_zero)
    w = kernel_weights(E.dists, sigma)
    statemon.state.increment('n_edges_built', len(E))
    return Graph(E.n_nodes, E.rows, E.cols, w)


def build_laplacian(G):
    """
    :param G: A valid Graph.
    :return: Its combinatorial LaplacianView, L = D - W.
    """
    return LaplacianView(G)


def connected_components(G):
    """
    Partitions the nodes by reachability.

    :param G: A Graph.
    :return: A list of sorted integer arrays, one per component, ordered by
             their smallest member.
    """
    _, labels = csgraph.connected_components(G.adjacency, directed=False)
    comps = {}
    for node, lab in enumerate(labels):
        comps.setdefault(lab, []).append(node)
    out = [np.array(c, dtype=np.int64) for c in comps.values()]
    out.sort(key=lambda c: c[0])
    return out


def connect_components(G, X, sigma, chunk_size=KNN_CHUNK_SIZE):
    """
    Connects a disconnected graph by repeatedly adding the shortest edge
    between the component grown from node 0 and the rest of the graph, which
    adds exactly one edge per extra component. The new edges are weighted
    with the same Gaussian kernel.

    :param G: A Graph.
    :param X: The FeatureMatrix G was built on.
    :param sigma: The kernel bandwidth.
    :return: The connected Graph and the list of added (i, j, d) edges.
    """
    comps = connected_components(G)
    if len(comps) == 1:
        return G, []
    n = G.n_nodes
    comp_of = np.empty(n, dtype=np.int64)
    for c, members in enumerate(comps):
        comp_of[members] = c
    data = X.data
    in_main = np.zeros(n, dtype=bool)
    best_d = np.full(n, np.inf)
    best_src = np.full(n, -1, dtype=np.int64)

    def absorb(nodes):
        in_main[nodes] = True
        best_d[nodes] = np.inf
        rest = np.flatnonzero(~in_main)
        if not len(rest):
            return
        for start, stop in blocks(len(nodes), chunk_size):
            src = nodes[start:stop]
            D = cdist(data[src], data[rest], 'euclidean')
            arg = np.argmin(D, axis=0)
            d = D[arg, np.arange(len(rest))]
            s = src[arg]
            better = (d < best_d[rest]) | ((d == best_d[rest]) &
                                            (s < best_src[rest]))
            best_d[rest[better]] = d[better]
            best_src[rest[better]] = s[better]

    absorb(comps[0])
    bridges = []
    while not in_main.all():
        j = int(np.argmin(np.where(in_main, np.inf, best_d)))
        i = int(best_src[j])
        bridges.append(pair_to_tuple(i, j) + (float(pairwise_distance(
            data[i], data[j])),))
        absorb(comps[comp_of[j]])
    rows = [b[0] for b in bridges]
    cols = [b[1] for b in bridges]
    w = kernel_weights([b[2] for b in bridges], sigma)
    for (i, j, d), wij in zip(bridges, w):
        _log.warning('Bridging components with edge (%i, %i), d=%.4g, w=%.4g'
                     % (i, j, d, wij))
    statemon.state.increment('n_components_bridged', len(bridges))
    return G.with_edges(rows, cols, w), bridges


def build_graph(X, k=DEF_K, policy=DISCONNECTED_POLICY,
                counting=SIGMA_EDGE_COUNTING):
    """
    Builds the instance graph from a FeatureMatrix: k-NN edges (k capped at
    N - 1), kernel bandwidth, Gaussian weights, and the disconnected-graph
    policy.

    :param X: A FeatureMatrix.
    :param k: The number of neighbours.
    :param policy: 'connect' or 'error'.
    :param counting: The edge counting convention for sigma.
    :return: (Graph, KernelBandwidth, ConnectivityReport)
    """
    if k is None:
        k = DEF_K
    if k >= X.n:
        _log.warning('k=%i capped at N-1=%i' % (k, X.n - 1))
        k = X.n - 1
    E = knn_edges(X, k)
    bw = estimate_sigma(X, E, counting)
    G = gaussian_weights(E, bw.sigma)
    comps = connected_components(G)
    sizes = [len(c) for c in comps]
    bridges = []
    if len(comps) > 1:
        _log.warning('k-NN graph has %i components (largest %i)'
                     % (len(comps), max(sizes)))
        if policy == 'error':
            raise DegenerateInputError('The k-NN graph is disconnected (%i '
                                       'components)' % len(comps))
        elif policy != 'connect':
            raise ParameterError('Unknown disconnected policy %r' % policy)
        G, bridges = connect_components(G, X, bw.sigma)
    _log.info('Graph built: N=%i, |E|=%i, sigma=%.6g'
              % (G.n_nodes, G.n_edges, bw.sigma))
    report = ConnectivityReport(k, len(comps), sizes, bridges, bw.sigma)
    return G, bw, report
