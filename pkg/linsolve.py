"""
Block (multi right-hand side) preconditioned conjugate gradient for sparse
symmetric positive definite systems. This is the iterative path shared by the
Sobolev solver and the regularized recovery, both of which need to solve the
same SPD matrix against many right-hand sides at once.

Every column runs its own CG recurrence; they only share the matrix products.
A column stops updating as soon as its relative residual drops below tol.
"""

import collections
import numpy as np
from scipy import sparse
import logger
import statemon
from _globals import ConvergenceError, ParameterError

_log = logger.setup_logger(__name__)

statemon.define('n_cg_calls', int)
statemon.define('n_cg_iterations', int)

CGInfo = collections.namedtuple('CGInfo', ['iterations', 'residuals'])


def jacobi(A):
    """
    Returns the inverse diagonal of A as a vector, i.e. the Jacobi
    preconditioner. Zero diagonal entries are left unscaled.
    """
    d = np.asarray(A.diagonal(), dtype=float)
    out = np.ones_like(d)
    nz = d > 0
    out[nz] = 1.0 / d[nz]
    return out


def block_cg(A, B, tol=1e-10, max_iter=None, precondition=True):
    """
    Solves A X = B for SPD A.

    :param A: An N x N sparse (or dense) SPD matrix.
    :param B: The right-hand sides, length N or N x k.
    :param tol: The relative residual ||b - Ax|| / ||b|| every column must
                reach.
    :param max_iter: The maximum number of iterations. Defaults to 10 N.
    :param precondition: If True, uses the Jacobi preconditioner.
    :return: X (same shape as B) and a CGInfo with the iteration count and
             the final relative residual per column.
    :raises ConvergenceError: if any column does not converge.
    """
    if tol <= 0:
        raise ParameterError('tol must be positive, got %r' % tol)
    B = np.asarray(B, dtype=float)
    vector = B.ndim == 1
    if vector:
        B = B[:, None]
    n, k = B.shape
    if A.shape != (n, n):
        raise ParameterError('Matrix of shape %s does not match %i rows'
                             % (A.shape, n))
    if max_iter is None:
        max_iter = 10 * n
    if sparse.issparse(A):
        A = A.tocsr()
    minv = jacobi(A)[:, None] if precondition else np.ones((n, 1))
    X = np.zeros((n, k))
    R = B.copy()
    Z = minv * R
    P = Z.copy()
    rz = np.einsum('ij,ij->j', R, Z)
    bnorm = np.linalg.norm(B, axis=0)
    active = bnorm > 0
    rel = np.zeros(k)
    it = 0
    statemon.state.increment('n_cg_calls')
    while active.any() and it < max_iter:
        it += 1
        AP = A @ P
        pap = np.einsum('ij,ij->j', P, AP)
        alpha = np.zeros(k)
        ok = active & (pap > 0)
        alpha[ok] = rz[ok] / pap[ok]
        X += alpha * P
        R -= alpha * AP
        rel[active] = np.linalg.norm(R[:, active], axis=0) / bnorm[active]
        active &= rel > tol
        if not active.any():
            break
        Z = minv * R
        rz_new = np.einsum('ij,ij->j', R, Z)
        beta = np.zeros(k)
        nz = active & (rz > 0)
        beta[nz] = rz_new[nz] / rz[nz]
        P = np.where(active, Z + beta * P, P)
        rz = np.where(active, rz_new, rz)
    statemon.state.increment('n_cg_iterations', it)
    if active.any():
        worst = float(rel.max())
        raise ConvergenceError('Conjugate gradient did not converge in %i '
                               'iterations (relative residual %.3g > %.3g)'
                               % (it, worst, tol), residual=worst,
                               iterations=it)
    if it > max_iter // 2:
        _log.warning('CG needed %i of %i allowed iterations' % (it, max_iter))
    info = CGInfo(it, rel)
    if vector:
        return X[:, 0], info
    return X, info


def block_cg_power(A, B, power, tol=1e-10, max_iter=None):
    """
    Applies A^{-power} to B for a positive integer power by `power`
    successive SPD solves.

    :return: A^{-power} B and the CGInfo of the last solve.
    """
    if int(power) != power or power < 1:
        raise ParameterError('power must be a positive integer, got %r'
                             % power)
    X = B
    info = None
    for _ in range(int(power)):
        X, info = block_cg(A, X, tol=tol, max_iter=max_iter)
    return X, info
