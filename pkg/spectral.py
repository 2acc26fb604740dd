"""
Eigendecomposition of the Laplacian at small scale, the graph Fourier
transform, and the bandlimited (Paley-Wiener) projections used by the
sampling theory and the verification suites.

Only a dense symmetric eigensolver is provided, with a hard limit on N: the
production solver path never needs eigenvectors, these tools exist for theory
checks and small graphs.

NOTES:
    Eigenvectors in a cluster of (numerically) equal eigenvalues are only
    defined up to a rotation inside the cluster. Anything comparing
    eigenvectors across solvers must compare projectors U_r U_r^T, not
    columns.
"""

import csv
import numpy as np
from scipy import linalg
from conf import *

_log = logger.setup_logger(__name__)


class SpectralBasis(object):
    """
    The graph Fourier basis: nondecreasing eigenvalues and the orthonormal
    eigenvector matrix U (one eigenvector per column), L = U diag(lam) U^T.
    """
    def __init__(self, eigenvalues, eigenvectors):
        self.eigenvalues = frozen(np.asarray(eigenvalues, dtype=float))
        self.eigenvectors = frozen(np.asarray(eigenvectors, dtype=float))
        n = len(self.eigenvalues)
        if self.eigenvectors.shape != (n, n):
            raise StructuralError('Eigenvector matrix is %s for %i eigenvalues'
                                  % (self.eigenvectors.shape, n))
        if np.any(np.diff(self.eigenvalues) < 0):
            raise StructuralError('Eigenvalues must be nondecreasing')

    @property
    def n(self):
        return len(self.eigenvalues)

    def leading(self, rho):
        """
        :return: U_rho, the first rho eigenvectors as an N x rho matrix.
        """
        _check_rho(self, rho)
        return self.eigenvectors[:, :rho]

    def orthonormality_error(self):
        U = self.eigenvectors
        return float(np.linalg.norm(U.T @ U - np.eye(self.n)))

    def reconstruction_error(self, lap):
        """
        :return: ||L - U diag(lam) U^T||_F / ||L||_F (0 for an empty graph).
        """
        L = lap.dense()
        U = self.eigenvectors
        R = U @ np.diag(self.eigenvalues) @ U.T
        denom = np.linalg.norm(L)
        if denom == 0:
            return float(np.linalg.norm(R))
        return float(np.linalg.norm(L - R) / denom)


class BandlimitedSpec(object):
    """
    A bandwidth rho together with its cutoff frequency omega = lambda_rho.
    """
    def __init__(self, rho, omega):
        if rho < 1:
            raise ParameterError('rho must be >= 1, got %r' % rho)
        self.rho = int(rho)
        self.omega = float(omega)

    @classmethod
    def from_basis(cls, basis, rho):
        _check_rho(basis, rho)
        return cls(rho, basis.eigenvalues[rho - 1])


def _check_rho(basis, rho):
    if int(rho) != rho or not 1 <= rho <= basis.n:
        raise ParameterError('rho must be an integer in [1, %i], got %r'
                             % (basis.n, rho))


def _fix_signs(U):
    """
    Flips each column so that its first nonzero entry is positive.
    """
    U = U.copy()
    for c in range(U.shape[1]):
        nz = np.flatnonzero(np.abs(U[:, c]) > 1e-12)
        if len(nz) and U[nz[0], c] < 0:
            U[:, c] = -U[:, c]
    return U


def eigendecompose(lap, limit=DENSE_EIG_LIMIT):
    """
    Dense symmetric eigendecomposition of a Laplacian.

    :param lap: A LaplacianView.
    :param limit: The largest N allowed.
    :return: A SpectralBasis with sign-normalized eigenvectors.
    :raises CapabilityError: if N > limit.
    """
    n = lap.n
    if n > limit:
        raise CapabilityError('N=%i exceeds the dense eigensolve limit %i; '
                              'use the eigendecomposition-free paths '
                              '(iterative solver, regularized recovery)'
                              % (n, limit))
    lam, U = linalg.eigh(lap.dense())
    _log.debug('Eigendecomposition of N=%i: lambda_2=%.4g, lambda_N=%.4g'
               % (n, lam[1] if n > 1 else lam[0], lam[-1]))
    return SpectralBasis(lam, _fix_signs(U))


def _check_length(basis, y):
    y = np.asarray(y, dtype=float)
    if y.shape[0] != basis.n:
        raise StructuralError('Signal of length %i on a graph of %i nodes'
                              % (y.shape[0], basis.n))
    return y


def gft(basis, y):
    """
    The graph Fourier transform, yhat = U^T y.
    """
    y = _check_length(basis, y)
    return basis.eigenvectors.T @ y


def igft(basis, yhat):
    """
    The inverse graph Fourier transform, y = U yhat.
    """
    yhat = _check_length(basis, yhat)
    return basis.eigenvectors @ yhat


def project_bandlimited(basis, y, rho):
    """
    Orthogonal projection of y onto span(U_rho).
    """
    y = _check_length(basis, y)
    U = basis.leading(rho)
    return U @ (U.T @ y)


def is_bandlimited(basis, y, rho, tol=1e-9):
    """
    :return: True iff every GFT coefficient beyond rho is within tol of 0.
    """
    if tol < 0:
        raise ParameterError('tol must be >= 0')
    _check_rho(basis, rho)
    yhat = gft(basis, y)
    if rho == basis.n:
        return True
    return bool(np.max(np.abs(yhat[rho:])) <= tol)


def spectral_function(basis, func):
    """
    Applies a scalar function to the Laplacian through its spectrum,
    f(L) = U diag(f(lam)) U^T. Eigenvalues are clipped at zero first, since L
    is PSD and rounding can leave tiny negative values.
    """
    lam = np.clip(basis.eigenvalues, 0.0, None)
    U = basis.eigenvectors
    return (U * func(lam)) @ U.T


def write_spectrum_csv(basis, path, with_vectors=False):
    """
    Dumps the eigenvalues (and optionally U) for inspection: one row per
    eigenpair, 'index,eigenvalue[,u_0,...,u_{N-1}]'.
    """
    with open(path, 'w') as f:
        w = csv.writer(f, lineterminator='\n')
        header = ['index', 'eigenvalue']
        if with_vectors:
            header += ['u_%i' % i for i in range(basis.n)]
        w.writerow(header)
        for i, lam in enumerate(basis.eigenvalues):
            row = [i, FLOAT_STR % lam]
            if with_vectors:
                row += [FLOAT_STR % v for v in basis.eigenvectors[:, i]]
            w.writerow(row)
    _log.info('Wrote %i eigenvalues to %s' % (basis.n, path))
