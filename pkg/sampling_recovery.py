"""
Sampling sets, the decimation operator, and three ways of recovering a graph
signal from its samples:

    chen-exact          perfect recovery of a bandlimited signal,
                        y = U_rho (M U_rho)^+ y(S), valid iff rank(M U_rho) = rho
    least-squares       the same pseudo-inverse formula without the rank
                        precondition
    puy-regularized     y = (M^T P^-1 M + eta g(L))^-1 M^T P^-1 y(S)

The first two need the spectral basis (small N only); the regularized
estimator only needs the sparse Laplacian.
"""

import numpy as np
from scipy import linalg
from scipy import sparse
from conf import *
import linsolve

_log = logger.setup_logger(__name__)

KINDS = ('chen-exact', 'least-squares', 'puy-regularized')


class SamplingSet(object):
    """
    An ordered set of distinct node indices s_1 ... s_m. The order is the row
    order of the decimation matrix M.
    """
    def __init__(self, indices, n_nodes):
        """
        :param indices: The sampled node indices, in order.
        :param n_nodes: N, the number of nodes of the graph.
        """
        idx = np.asarray(indices, dtype=np.int64).ravel()
        if not 1 <= len(idx) <= n_nodes:
            raise StructuralError('A sampling set needs 1 <= m <= N=%i nodes, '
                                  'got %i' % (n_nodes, len(idx)))
        if idx.min() < 0 or idx.max() >= n_nodes:
            raise StructuralError('Sampled index out of range [0, %i)'
                                  % n_nodes)
        if len(np.unique(idx)) != len(idx):
            raise StructuralError('Sampling set has duplicate indices')
        self.indices = frozen(idx)
        self.n_nodes = int(n_nodes)

    @property
    def m(self):
        return len(self.indices)

    def __len__(self):
        return self.m

    def mask(self):
        """
        :return: A boolean vector of length N, True at sampled nodes.
        """
        out = np.zeros(self.n_nodes, dtype=bool)
        out[self.indices] = True
        return out

    def matrix(self):
        """
        :return: The m x N binary decimation matrix M as a CSR matrix.
        """
        m = self.m
        return sparse.csr_matrix((np.ones(m), (np.arange(m), self.indices)),
                                 shape=(m, self.n_nodes))

    def __repr__(self):
        shown = self.indices[:8].tolist()
        more = ', ...' if self.m > 8 else ''
        return 'SamplingSet(%s%s; N=%i)' % (shown, more, self.n_nodes)


def decimate(y, S):
    """
    Keeps the entries of y on the sampling set, y(S) = M y.

    :param y: A length N vector (or N x Q matrix).
    :param S: A SamplingSet.
    :return: The length m vector (or m x Q matrix) of samples, in S's order.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[0] != S.n_nodes:
        raise StructuralError('Signal of length %i sampled on a set over %i '
                              'nodes' % (y.shape[0], S.n_nodes))
    return y[S.indices]


def _check_samples(S, y_S):
    y_S = np.asarray(y_S, dtype=float)
    if y_S.shape[0] != S.m:
        raise StructuralError('%i samples for a sampling set of size %i'
                              % (y_S.shape[0], S.m))
    return y_S


def verify_sampling_rank(basis, S, rho):
    """
    Checks the perfect-recovery condition rank(M U_rho) = rho.

    :return: (ok, sigma_min) where sigma_min is the rho-th singular value of
             M U_rho (0 when m < rho).
    """
    B = basis.leading(rho)[S.indices]
    if S.m < rho:
        return False, 0.0
    sv = linalg.svd(B, compute_uv=False)
    smin = float(sv[rho - 1])
    return smin > RANK_TOL, smin


def _pinv(B, cutoff=RANK_TOL):
    """
    Moore-Penrose pseudo-inverse from the SVD, dropping singular values below
    cutoff * sigma_max.

    :return: (B^+, numerical rank)
    """
    U, s, Vt = linalg.svd(B, full_matrices=False)
    if not len(s) or s[0] == 0:
        return np.zeros(B.T.shape), 0
    keep = s > cutoff * s[0]
    inv = (Vt[keep].T / s[keep]) @ U[:, keep].T
    return inv, int(np.sum(keep))


def least_squares_recover(basis, S, y_S, rho):
    """
    The least-squares reconstruction y = U_rho (M U_rho)^+ y(S), with no rank
    check.

    :return: (recovered signal, numerical rank of M U_rho)
    """
    y_S = _check_samples(S, y_S)
    U = basis.leading(rho)
    pinv, rank = _pinv(U[S.indices])
    return U @ (pinv @ y_S), rank


def chen_recover(basis, S, y_S, rho):
    """
    Perfect recovery of a rho-bandlimited signal from its samples.

    :param basis: The SpectralBasis of the graph.
    :param S: A SamplingSet with m >= rho.
    :param y_S: The samples y(S), a length m vector or m x Q matrix.
    :param rho: The bandwidth.
    :return: The recovered length N signal.
    :raises RecoveryError: if rank(M U_rho) < rho.
    """
    ok, smin = verify_sampling_rank(basis, S, rho)
    if not ok:
        raise RecoveryError('Perfect recovery is impossible from %r with '
                            'bandwidth %i: sigma_min(M U_rho) = %.3g'
                            % (S, rho, smin))
    y, _ = least_squares_recover(basis, S, y_S, rho)
    return y


def polynomial_of(lap, g_coeffs):
    """
    g(L) = sum_k c_k L^k as a sparse matrix.

    :param lap: A LaplacianView.
    :param g_coeffs: The coefficients c_0, c_1, ... (nonnegative).
    """
    coeffs = [float(c) for c in g_coeffs]
    if not coeffs:
        raise ParameterError('g needs at least one coefficient')
    if any(c < 0 for c in coeffs):
        raise ParameterError('g coefficients must be nonnegative, got %r'
                             % (coeffs,))
    n = lap.n
    L = lap.matrix
    out = sparse.csr_matrix((n, n))
    power = sparse.identity(n, format='csr')
    for k, c in enumerate(coeffs):
        if k:
            power = (power @ L).tocsr()
        if c:
            out = out + c * power
    return out.tocsr()


def _check_puy(S, y_S, eta, P_diag):
    y_S = _check_samples(S, y_S)
    if not eta > 0:
        raise ParameterError('eta must be positive, got %r' % eta)
    if P_diag is None:
        P_diag = np.ones(S.m)
    P_diag = np.asarray(P_diag, dtype=float).ravel()
    if len(P_diag) != S.m:
        raise StructuralError('%i P weights for %i samples'
                              % (len(P_diag), S.m))
    if np.any(P_diag <= 0) or not np.all(np.isfinite(P_diag)):
        raise ParameterError('P weights must be positive and finite')
    return y_S, P_diag


def puy_recover(lap, S, y_S, eta=DEF_ETA, g_coeffs=DEF_G_COEFFS, P_diag=None,
                tol=DEF_CG_TOL, max_iter=DEF_CG_MAX_ITER):
    """
    The regularized estimator

        argmin_z (Mz - y(S))^T P^-1 (Mz - y(S)) + eta z^T g(L) z

    solved through its normal equations. The solve is direct (Cholesky) up to
    CLOSED_FORM_LIMIT nodes and conjugate gradient above.

    :param lap: A LaplacianView.
    :param S: A SamplingSet.
    :param y_S: The samples, length m (or m x Q).
    :param eta: The regularization weight, > 0.
    :param g_coeffs: Polynomial coefficients of g, lowest degree first.
    :param P_diag: The diagonal of P (default all ones).
    :return: The recovered signal.
    :raises NumericalError: if the system is singular.
    """
    y_S, P_diag = _check_puy(S, y_S, eta, P_diag)
    n = lap.n
    data = np.zeros(n)
    data[S.indices] = 1.0 / P_diag
    A = (sparse.diags(data) + eta * polynomial_of(lap, g_coeffs)).tocsr()
    rhs = np.zeros((n,) + y_S.shape[1:])
    rhs[S.indices] = (y_S.T / P_diag).T
    if n <= CLOSED_FORM_LIMIT:
        try:
            factor = linalg.cho_factor(A.toarray())
        except linalg.LinAlgError:
            raise NumericalError('The regularized recovery system is singular: '
                                 'eta g(L) vanishes on an unsampled direction')
        return linalg.cho_solve(factor, rhs)
    y, _ = linsolve.block_cg(A, rhs, tol=tol, max_iter=max_iter)
    return y


def puy_objective(lap, S, y_S, z, eta=DEF_ETA, g_coeffs=DEF_G_COEFFS,
                  P_diag=None):
    """
    :return: The value of the regularized recovery objective at z.
    """
    y_S, P_diag = _check_puy(S, y_S, eta, P_diag)
    z = np.asarray(z, dtype=float)
    r = decimate(z, S) - y_S
    gz = polynomial_of(lap, g_coeffs) @ z
    return float(np.sum((r.T / P_diag).T * r) + eta * np.sum(z * gz))


class RecoveryOperator(object):
    """
    A recovery method and its parameters, applied to (S, y(S)) pairs.
    """
    def __init__(self, kind, rho=None, eta=DEF_ETA, g_coeffs=DEF_G_COEFFS,
                 P_diag=None):
        if kind not in KINDS:
            raise ParameterError('Unknown recovery kind %r (one of %s)'
                                 % (kind, ', '.join(KINDS)))
        if kind != 'puy-regularized' and (rho is None or rho < 1):
            raise ParameterError('%s recovery needs a bandwidth rho >= 1'
                                 % kind)
        if kind == 'puy-regularized':
            if not eta > 0:
                raise ParameterError('eta must be positive, got %r' % eta)
            polynomial_coefficients_ok(g_coeffs)
        self.kind = kind
        self.rho = rho
        self.eta = eta
        self.g_coeffs = tuple(g_coeffs)
        self.P_diag = P_diag

    def apply(self, S, y_S, basis=None, lap=None):
        """
        :param basis: The SpectralBasis (spectral kinds).
        :param lap: The LaplacianView (regularized kind).
        :return: The recovered signal.
        """
        if self.kind == 'puy-regularized':
            if lap is None:
                raise ParameterError('Regularized recovery needs the Laplacian')
            return puy_recover(lap, S, y_S, self.eta, self.g_coeffs,
                               self.P_diag)
        if basis is None:
            raise ParameterError('%s recovery needs the spectral basis'
                                 % self.kind)
        if self.kind == 'chen-exact':
            return chen_recover(basis, S, y_S, self.rho)
        y, rank = least_squares_recover(basis, S, y_S, self.rho)
        if rank < self.rho:
            _log.warning('M U_rho has rank %i < rho=%i; the least-squares '
                         'solution is not unique' % (rank, self.rho))
        return y


def polynomial_coefficients_ok(g_coeffs):
    if not len(g_coeffs) or any(float(c) < 0 for c in g_coeffs):
        raise ParameterError('g coefficients must be a nonempty list of '
                             'nonnegative numbers, got %r' % (g_coeffs,))
    return True


def sample_uniform(n, density, rng_seed):
    """
    Draws ceil(density * N) distinct nodes uniformly at random.

    :param n: The number of nodes N.
    :param density: The fraction of nodes to sample, in (0, 1].
    :param rng_seed: The seed; the same seed always gives the same set.
    :return: A SamplingSet with sorted indices.
    """
    if not 0 < density <= 1:
        raise ParameterError('density must be in (0, 1], got %r' % density)
    m = int(np.ceil(density * n - 1e-9))
    if m < 1:
        raise ParameterError('density %r samples no node of %i' % (density, n))
    rng = np.random.default_rng(rng_seed)
    idx = np.sort(rng.choice(n, size=m, replace=False))
    _log.debug('Sampled %i of %i nodes (seed %r)' % (m, n, rng_seed))
    return SamplingSet(idx, n)
