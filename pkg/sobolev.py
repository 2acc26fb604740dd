"""
The semi-supervised variational solver. For every class column q it finds

    z_q = argmin_z  z^T (L + eps I)^beta z    subject to  M z = y_q(S)

whose solution is

    Z = K M^T (M K M^T)^-1 Y(S),     K = ((L + eps I)^-1)^beta.

Three realizations of K M^T are available:
    closed      dense Cholesky factorization of L + eps I, applied beta times
    iterative   block conjugate gradient on the sparse L + eps I, no dense N x N
                matrix is ever formed
    spectral    K from the eigendecomposition; the only path for fractional
                beta and for the degree-weighted objective

The module also holds the degree-weighted inner product and Sobolev norm, and
the perturbation checks on L + Psi (condition number sandwich, Weyl's
eigenvalue sandwich, and the two matrix-norm lemmas).

NOTES:
    The objective above is the unweighted quadratic form. The degree-weighted
    norm (hilbert_inner / sobolev_norm) is a different quantity; the solver
    only uses it when weighting='degree' is requested explicitly.
"""

import collections
import numpy as np
from scipy import linalg
from scipy import sparse
from conf import *
import linsolve
import spectral
import statemon
from graph_core import LaplacianView
from sampling_recovery import SamplingSet

_log = logger.setup_logger(__name__)

statemon.define('n_solves', int)
statemon.define('n_factorizations', int)

METHODS = ('closed', 'iterative', 'spectral', 'auto')
WEIGHTINGS = ('none', 'degree')

PerturbationReport = collections.namedtuple(
    'PerturbationReport', ['sigma_max_L', 'sigma_max_Psi', 'sigma_max_sum',
                           'sigma_min_sum', 'kappa', 'lower_bound',
                           'upper_bound', 'bounds_ok', 'weyl_ok'])


class SobolevParams(object):
    """
    The regularizer parameters: the shift epsilon >= 0 and the exponent
    beta > 0, plus the objective weighting ('none' or 'degree').
    """
    def __init__(self, epsilon=DEF_EPSILON, beta=DEF_BETA,
                 weighting=DEF_WEIGHTING):
        epsilon = float(epsilon)
        beta = float(beta)
        if not epsilon >= 0 or not np.isfinite(epsilon):
            raise ParameterError('epsilon must be >= 0, got %r' % epsilon)
        if not beta > 0 or not np.isfinite(beta):
            raise ParameterError('beta must be > 0, got %r' % beta)
        if weighting not in WEIGHTINGS:
            raise ParameterError('weighting must be one of %s, got %r'
                                 % (WEIGHTINGS, weighting))
        self.epsilon = epsilon
        self.beta = int(beta) if beta == int(beta) else beta
        self.weighting = weighting

    @property
    def integer_beta(self):
        return isinstance(self.beta, int)

    def require_solvable(self):
        if not self.epsilon > 0:
            raise ParameterError('The solvers need epsilon > 0 (L + eps I must '
                                 'be invertible), got %r' % self.epsilon)

    def __repr__(self):
        return 'SobolevParams(epsilon=%r, beta=%r, weighting=%r)' % (
            self.epsilon, self.beta, self.weighting)


class LabelMatrix(object):
    """
    The N x Q one-hot label matrix Y together with the set of rows whose
    labels are known. Rows outside the sampling set are ignored (zero).
    """
    def __init__(self, Y, sampled):
        """
        :param Y: An N x Q array-like.
        :param sampled: A SamplingSet, or a sequence of row indices.
        """
        Y = np.array(Y, dtype=float)
        if Y.ndim != 2:
            raise StructuralError('Label matrix must be N x Q')
        n, q = Y.shape
        if q < 2:
            raise StructuralError('Need at least 2 classes, got %i' % q)
        if not isinstance(sampled, SamplingSet):
            sampled = SamplingSet(sampled, n)
        if sampled.n_nodes != n:
            raise StructuralError('Sampling set over %i nodes for %i label rows'
                                  % (sampled.n_nodes, n))
        known = Y[sampled.indices]
        if not np.all((known == 0) | (known == 1)) or \
                not np.all(known.sum(axis=1) == 1):
            raise StructuralError('Known label rows must be one-hot')
        self.Y = frozen(Y)
        self.sampled = sampled

    @classmethod
    def from_classes(cls, classes, sampled, n_classes=NUM_CLASSES):
        """
        Builds the one-hot matrix from class indices.

        :param classes: Length N class indices; UNLABELED (-1) is allowed
                        outside the sampling set.
        :param sampled: The rows whose labels are known.
        """
        classes = np.asarray(classes, dtype=np.int64)
        n = len(classes)
        if not isinstance(sampled, SamplingSet):
            sampled = SamplingSet(sampled, n)
        known = classes[sampled.indices]
        if np.any(known < 0) or np.any(known >= n_classes):
            raise StructuralError('Sampled nodes must carry a class in '
                                  '[0, %i)' % n_classes)
        Y = np.zeros((n, n_classes))
        ok = (classes >= 0) & (classes < n_classes)
        Y[np.flatnonzero(ok), classes[ok]] = 1.0
        return cls(Y, sampled)

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def q(self):
        return self.Y.shape[1]

    def sampled_values(self):
        """
        :return: Y(S), the m x Q known rows in sampling order.
        """
        return self.Y[self.sampled.indices]


class RecoveredSignal(object):
    """
    The recovered N x Q class scores and the per-node argmax decision.
    """
    def __init__(self, Z, method=None, info=None):
        self.Z = frozen(np.asarray(Z, dtype=float))
        self.labels = frozen(classify(self.Z))
        self.method = method
        self.info = info

    def interpolation_error(self, labels):
        """
        :return: max over sampled rows of |Z(s, q) - Y(s, q)|.
        """
        idx = labels.sampled.indices
        return float(np.max(np.abs(self.Z[idx] - labels.Y[idx])))


def _check_signal(f, n):
    f = np.asarray(f, dtype=float)
    if f.shape[0] != n:
        raise StructuralError('Signal of length %i on a graph of %i nodes'
                              % (f.shape[0], n))
    return f


def hilbert_inner(f, g, G):
    """
    The degree-weighted inner product <f, g> = sum_v f(v) g(v) D(v, v).

    :param G: The Graph (or a LaplacianView of it) providing the degrees.
    """
    if isinstance(G, LaplacianView):
        G = G.source
    f = _check_signal(f, G.n_nodes)
    g = _check_signal(g, G.n_nodes)
    return float(np.sum(f * g * G.degree))


def _shift_power_apply(lap, epsilon, power, f):
    """
    (L + eps I)^power f for a nonnegative integer power, by repeated sparse
    products.
    """
    A = lap.shifted(epsilon)
    out = f
    for _ in range(power):
        out = A @ out
    return out


def sobolev_norm(f, lap, params):
    """
    ||(L + eps I)^(beta/2) f|| measured in the degree-weighted norm. Even
    integer beta is evaluated with sparse products; any other beta goes
    through the eigendecomposition (small N only). epsilon = 0 is accepted
    and makes this a seminorm that vanishes on constants.

    :param f: A length N signal.
    :param lap: A LaplacianView.
    :param params: SobolevParams.
    :return: The norm, >= 0.
    """
    f = _check_signal(f, lap.n)
    if params.integer_beta and params.beta % 2 == 0:
        h = _shift_power_apply(lap, params.epsilon, params.beta // 2, f)
    else:
        basis = spectral.eigendecompose(lap)
        half = params.beta / 2.0
        h = spectral.spectral_function(
            basis, lambda lam: (lam + params.epsilon) ** half) @ f
    return float(np.sqrt(max(hilbert_inner(h, h, lap.source), 0.0)))


def sobolev_quadratic(f, lap, params):
    """
    The unweighted solver objective f^T (L + eps I)^beta f, for integer beta,
    without an eigendecomposition.
    """
    if not params.integer_beta:
        raise ParameterError('sobolev_quadratic needs an integer beta, got %r'
                             % params.beta)
    f = _check_signal(f, lap.n)
    h = _shift_power_apply(lap, params.epsilon, params.beta // 2, f)
    if params.beta % 2:
        return float(np.sum(h * (lap.shifted(params.epsilon) @ h)))
    return float(np.sum(h * h))


def classify(Z):
    """
    Row-wise argmax of the recovered scores; ties go to the lowest class
    index, i.e. background.

    :param Z: A RecoveredSignal or an N x Q array.
    :return: The class index of every node.
    """
    if isinstance(Z, RecoveredSignal):
        Z = Z.Z
    Z = np.asarray(Z, dtype=float)
    if not np.all(np.isfinite(Z)):
        raise NumericalError('Recovered scores contain NaN or Inf')
    return np.argmax(Z, axis=1)


class SobolevSolver(object):
    """
    Solves the interpolation problem on one graph for any number of label
    matrices, caching what can be reused between solves (the Cholesky factor
    of L + eps I, or the spectral kernel). Call prepare() before sharing the
    solver between threads.
    """
    def __init__(self, lap, params=None, method=DEF_METHOD, tol=DEF_CG_TOL,
                 max_iter=DEF_CG_MAX_ITER):
        """
        :param lap: A LaplacianView.
        :param params: SobolevParams (defaults: eps 0.2, beta 1).
        :param method: 'closed', 'iterative', 'spectral' or 'auto'.
        :param tol: The relative residual of every inner CG solve.
        :param max_iter: The CG iteration cap.
        """
        params = params or SobolevParams()
        params.require_solvable()
        if method not in METHODS:
            raise ParameterError('method must be one of %s, got %r'
                                 % (METHODS, method))
        self.lap = lap
        self.params = params
        self.tol = tol
        self.max_iter = max_iter
        self.method = self._resolve(method)
        self._factor = None
        self._kernel = None
        _log.debug('Solver on N=%i: %r, method %s'
                   % (lap.n, params, self.method))

    def _resolve(self, method):
        p = self.params
        n = self.lap.n
        needs_spectral = not p.integer_beta or p.weighting == 'degree'
        if needs_spectral:
            if method == 'iterative':
                raise ParameterError('The iterative solver needs an integer '
                                     'beta and the unweighted objective')
            if n > DENSE_EIG_LIMIT:
                raise CapabilityError('Fractional beta or degree weighting on '
                                      'N=%i needs the spectral path, limited '
                                      'to N <= %i' % (n, DENSE_EIG_LIMIT))
            return 'spectral'
        if method == 'auto':
            return 'closed' if n <= CLOSED_FORM_LIMIT else 'iterative'
        if method == 'closed' and n > CLOSED_FORM_LIMIT:
            raise CapabilityError('N=%i exceeds the closed form limit %i; use '
                                  'the iterative method' % (n, CLOSED_FORM_LIMIT))
        return method

    def _cholesky(self):
        if self._factor is None:
            A = self.lap.dense() + self.params.epsilon * np.eye(self.lap.n)
            self._factor = linalg.cho_factor(A, lower=True)
            statemon.state.increment('n_factorizations')
        return self._factor

    def _spectral_kernel(self):
        """
        K = Q^-1 for the (possibly degree-weighted) objective matrix Q.
        """
        if self._kernel is None:
            p = self.params
            basis = spectral.eigendecompose(self.lap)
            if p.weighting == 'none':
                K = spectral.spectral_function(
                    basis, lambda lam: (lam + p.epsilon) ** (-p.beta))
            else:
                deg = self.lap.source.degree
                if np.any(deg <= 0):
                    raise DegenerateInputError('Degree weighting needs every '
                                               'node to have an edge')
                R = spectral.spectral_function(
                    basis, lambda lam: (lam + p.epsilon) ** (-p.beta / 2.0))
                K = (R / deg) @ R
            self._kernel = frozen(0.5 * (K + K.T))
            statemon.state.increment('n_factorizations')
        return self._kernel

    def prepare(self):
        """
        Fills the cache now, so that concurrent solves only read it.
        """
        if self.method == 'closed':
            self._cholesky()
        elif self.method == 'spectral':
            self._spectral_kernel()
        return self

    def kernel_columns(self, indices):
        """
        :return: K E_S, the N x m columns of the kernel at the given nodes,
                 and the CG info (None for the direct paths).
        """
        n = self.lap.n
        if self.method == 'spectral':
            return self._spectral_kernel()[:, indices], None
        E = np.zeros((n, len(indices)))
        E[indices, np.arange(len(indices))] = 1.0
        if self.method == 'closed':
            X = E
            for _ in range(self.params.beta):
                X = linalg.cho_solve(self._cholesky(), X)
            return X, None
        return linsolve.block_cg_power(self.lap.shifted(self.params.epsilon),
                                       E, self.params.beta, tol=self.tol,
                                       max_iter=self.max_iter)

    def solve(self, labels):
        """
        :param labels: A LabelMatrix over the same N nodes.
        :return: A RecoveredSignal.
        """
        if labels.n != self.lap.n:
            raise StructuralError('Labels for %i nodes on a graph of %i'
                                  % (labels.n, self.lap.n))
        idx = labels.sampled.indices
        Ys = labels.sampled_values()
        X, info = self.kernel_columns(idx)
        gram = X[idx]
        try:
            C = linalg.solve(gram, Ys, assume_a='gen')
        except linalg.LinAlgError:
            raise NumericalError('The %i x %i sampled kernel system is '
                                 'singular' % gram.shape)
        Z = X @ C
        out = RecoveredSignal(Z, self.method, info)
        err = out.interpolation_error(labels)
        if err > INTERPOLATION_TOL:
            raise NumericalError('Recovered signal misses the sampled labels '
                                 'by %.3g' % err)
        statemon.state.increment('n_solves')
        return out


def solve(lap, labels, params=None, method=DEF_METHOD, tol=DEF_CG_TOL,
          max_iter=DEF_CG_MAX_ITER):
    """
    Solves the interpolation problem with the given method ('auto' picks the
    closed form up to CLOSED_FORM_LIMIT nodes and the iterative solver
    above).
    """
    return SobolevSolver(lap, params, method, tol, max_iter).solve(labels)


def solve_closed_form(lap, labels, params=None):
    """
    Direct solution. Integer beta uses the Cholesky factorization of
    L + eps I; fractional beta (and degree weighting) the eigendecomposition.

    :raises ParameterError: if epsilon <= 0.
    """
    return solve(lap, labels, params, method='closed')


def solve_iterative(lap, labels, params=None, tol=DEF_CG_TOL,
                    max_iter=DEF_CG_MAX_ITER):
    """
    Eigendecomposition-free solution: (L + eps I)^beta w = e_s is solved by
    conjugate gradient for every sampled node s at once, then the m x m
    sampled system is solved directly.

    :raises ConvergenceError: if CG does not reach tol within max_iter.
    """
    return solve(lap, labels, params, method='iterative', tol=tol,
                 max_iter=max_iter)


"""
PERTURBATION CHECKS
"""


def _dense_symmetric(lap, Psi):
    n = lap.n
    if n > DENSE_EIG_LIMIT:
        raise CapabilityError('N=%i exceeds the dense limit %i'
                              % (n, DENSE_EIG_LIMIT))
    P = Psi.toarray() if sparse.issparse(Psi) else np.array(Psi, dtype=float)
    if P.shape != (n, n):
        raise StructuralError('Psi is %s on a graph of %i nodes'
                              % (P.shape, n))
    scale = max(1.0, float(np.max(np.abs(P))) if P.size else 1.0)
    if np.max(np.abs(P - P.T)) > 1e-12 * scale:
        raise StructuralError('Psi must be symmetric')
    return lap.dense(), P


def weyl_check(lap, Psi, tol=EIGENVALUE_TOL):
    """
    Checks lambda_i + psi_1 <= nu_i <= lambda_i + psi_N for every i, where
    lambda, psi and nu are the ascending eigenvalues of L, Psi and L + Psi.

    :return: (ok, triples) where triples is an N x 3 array of
             (lambda_i + psi_1, nu_i, lambda_i + psi_N).
    :raises StructuralError: if Psi is not symmetric.
    """
    L, P = _dense_symmetric(lap, Psi)
    lam = linalg.eigvalsh(L)
    psi = linalg.eigvalsh(P)
    nu = linalg.eigvalsh(L + P)
    lo = lam + psi[0]
    hi = lam + psi[-1]
    slack = tol * max(1.0, float(np.max(np.abs(nu))))
    ok = bool(np.all(lo - slack <= nu) and np.all(nu <= hi + slack))
    return ok, np.column_stack([lo, nu, hi])


def condition_bounds(lap, Psi, tol=EIGENVALUE_TOL):
    """
    Computes the condition number of L + Psi and its sandwich

        sigma_max(L+Psi) / sigma_max(Psi)
            <= kappa(L+Psi) <=
        (sigma_max(L) + sigma_max(Psi)) / sigma_min(L+Psi)

    A singular L + Psi is reported with kappa = inf rather than raised.

    :return: A PerturbationReport.
    """
    L, P = _dense_symmetric(lap, Psi)
    S = L + P
    s_L = float(linalg.svdvals(L)[0])
    s_P = float(linalg.svdvals(P)[0])
    sv = linalg.svdvals(S)
    s_max, s_min = float(sv[0]), float(sv[-1])
    lower = s_max / s_P if s_P > 0 else np.inf
    if s_min <= RANK_TOL * max(s_max, 1.0):
        _log.warning('L + Psi is singular (sigma_min=%.3g); kappa is infinite'
                     % s_min)
        kappa = upper = np.inf
        bounds_ok = False
    else:
        kappa = s_max / s_min
        upper = (s_L + s_P) / s_min
        bounds_ok = (lower <= kappa * (1 + tol)) and (kappa <= upper * (1 + tol))
        if not bounds_ok:
            _log.error('Condition number %.6g outside [%.6g, %.6g]'
                       % (kappa, lower, upper))
    weyl_ok, _ = weyl_check(lap, Psi)
    return PerturbationReport(s_L, s_P, s_max, s_min, kappa, lower, upper,
                              bool(bounds_ok), weyl_ok)


def kappa_curve(lap, epsilons):
    """
    kappa(L + eps I) = (lambda_N + eps) / (lambda_1 + eps) for every eps.
    """
    epsilons = np.asarray(epsilons, dtype=float)
    if np.any(epsilons <= 0):
        raise ParameterError('Every epsilon must be positive')
    if lap.n > DENSE_EIG_LIMIT:
        raise CapabilityError('N=%i exceeds the dense limit %i'
                              % (lap.n, DENSE_EIG_LIMIT))
    lam = np.clip(linalg.eigvalsh(lap.dense()), 0.0, None)
    return (lam[-1] + epsilons) / (lam[0] + epsilons)


def operator_norm_check(A, x, tol=1e-12):
    """
    ||A x|| <= ||A||_2 ||x||.

    :return: (ok, ||A x||, ||A||_2 ||x||)
    """
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    lhs = float(np.linalg.norm(A @ x))
    rhs = float(np.linalg.norm(A, 2) * np.linalg.norm(x))
    return lhs <= rhs * (1 + tol) + tol, lhs, rhs


def min_gain_check(A, n_trials=VERIFY_LEMMA_SAMPLES, seed=0, tol=1e-8):
    """
    min over random unit vectors x of ||A x|| is never below sigma_min(A).

    :return: (ok, observed minimum, sigma_min(A))
    """
    A = np.asarray(A, dtype=float)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((A.shape[1], n_trials))
    X /= np.linalg.norm(X, axis=0)
    observed = float(np.min(np.linalg.norm(A @ X, axis=0)))
    s_min = float(linalg.svdvals(A)[-1])
    return observed >= s_min - tol, observed, s_min
