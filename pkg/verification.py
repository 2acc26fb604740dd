"""
Executable checks of the theory the solver and the recovery rest on, run on
randomly generated graphs:

    spectral        orthonormal basis, exact reconstruction, lambda_1 = 0,
                    Parseval
    recovery        perfect recovery of bandlimited signals from rank-valid
                    sampling sets; fewer than rho samples never qualify
    condition       the condition number sandwich for L + Psi, with both
                    bounds equal to kappa when Psi = eps I
    weyl            lambda_i + psi_1 <= nu_i <= lambda_i + psi_N, and the exact
                    shift for Psi = eps I
    solver          the worked two-node example, closed form vs iterative
                    agreement, and optimality against random interpolants
    lemmas          ||Ax|| <= ||A|| ||x|| and min ||Ax|| >= sigma_min(A)
    monotonicity    kappa(L + eps I) decreases strictly in eps

Each suite returns a SuiteResult; a check that raises counts as a failure.
"""

import collections
import traceback
import numpy as np
from conf import *
import graph_core
import sampling_recovery
import sobolev
import spectral
import synthetic

_log = logger.setup_logger(__name__)

SuiteResult = collections.namedtuple('SuiteResult', ['name', 'n_checks',
                                                     'n_failed', 'notes'])


class _Tally(object):
    def __init__(self, name):
        self.name = name
        self.n_checks = 0
        self.n_failed = 0
        self.notes = []

    def check(self, ok, what):
        self.n_checks += 1
        if not ok:
            self.n_failed += 1
            if len(self.notes) < 10:
                self.notes.append('FAILED: %s' % what)
            _log.error('%s: %s failed' % (self.name, what))

    def error(self, what, exc):
        self.n_checks += 1
        self.n_failed += 1
        if len(self.notes) < 10:
            self.notes.append('ERROR: %s: %s' % (what, exc))
        _log.error('%s: %s raised\n%s' % (self.name, what,
                                          traceback.format_exc()))

    def note(self, text):
        self.notes.append(text)

    def result(self):
        return SuiteResult(self.name, self.n_checks, self.n_failed,
                           list(self.notes))


def _random_lap(rng, n_min, n_max):
    n = int(rng.integers(n_min, n_max + 1))
    return graph_core.build_laplacian(synthetic.random_connected_graph(n, rng))


def suite_spectral(rng, n_instances=50, max_n=30):
    tally = _Tally('spectral')
    for inst in range(n_instances):
        try:
            lap = _random_lap(rng, 2, max_n)
            basis = spectral.eigendecompose(lap)
            y = rng.standard_normal(lap.n)
            tally.check(basis.orthonormality_error() <= 1e-8,
                        'instance %i: U^T U = I' % inst)
            tally.check(basis.reconstruction_error(lap) <= 1e-8,
                        'instance %i: L = U diag(lam) U^T' % inst)
            tally.check(abs(basis.eigenvalues[0]) <= EIGENVALUE_TOL,
                        'instance %i: lambda_1 = 0' % inst)
            tally.check(abs(np.linalg.norm(spectral.gft(basis, y)) -
                            np.linalg.norm(y)) <= 1e-10 * max(
                                1.0, np.linalg.norm(y)),
                        'instance %i: Parseval' % inst)
        except GraphBGSError as e:
            tally.error('instance %i' % inst, e)
    return tally.result()


def _well_posed_sampling(basis, rho, rng, tries=20, min_sigma=1e-3):
    n = basis.n
    for _ in range(tries):
        m = int(rng.integers(rho, n + 1))
        S = sampling_recovery.SamplingSet(synthetic.random_sampling(n, m, rng),
                                          n)
        ok, smin = sampling_recovery.verify_sampling_rank(basis, S, rho)
        if ok and smin >= min_sigma:
            return S
    return sampling_recovery.SamplingSet(np.arange(n), n)


def suite_recovery(rng, n_instances=VERIFY_RECOVERY_INSTANCES,
                   max_n=VERIFY_RECOVERY_MAX_N):
    tally = _Tally('recovery')
    worst = 0.0
    for inst in range(n_instances):
        try:
            lap = _random_lap(rng, 2, max_n)
            basis = spectral.eigendecompose(lap)
            n = lap.n
            rho = int(rng.integers(1, max(n // 2, 1) + 1))
            y = spectral.project_bandlimited(basis, rng.standard_normal(n),
                                             rho)
            S = _well_posed_sampling(basis, rho, rng)
            y_hat = sampling_recovery.chen_recover(
                basis, S, sampling_recovery.decimate(y, S), rho)
            err = np.linalg.norm(y_hat - y) / max(np.linalg.norm(y), 1e-300)
            worst = max(worst, err)
            tally.check(err <= 1e-8, 'instance %i: relative error %.3g'
                        % (inst, err))
            if rho > 1:
                short = sampling_recovery.SamplingSet(
                    synthetic.random_sampling(n, rho - 1, rng), n)
                ok, _ = sampling_recovery.verify_sampling_rank(basis, short,
                                                               rho)
                tally.check(not ok, 'instance %i: %i < rho samples accepted'
                            % (inst, rho - 1))
        except GraphBGSError as e:
            tally.error('instance %i' % inst, e)
    tally.note('worst relative recovery error %.3g' % worst)
    return tally.result()


def _perturbation(rng, n, inject_fault):
    Psi = synthetic.random_spd(n, rng)
    if inject_fault:
        Psi[0, -1] += 1.0
    return Psi


def suite_condition(rng, n_instances=VERIFY_PERTURB_INSTANCES,
                    max_n=VERIFY_PERTURB_MAX_N, inject_fault=False):
    tally = _Tally('condition')
    worst_gap = 0.0
    for inst in range(n_instances):
        try:
            lap = _random_lap(rng, 2, max_n)
            rep = sobolev.condition_bounds(
                lap, _perturbation(rng, lap.n, inject_fault))
            tally.check(rep.bounds_ok, 'instance %i: %.6g <= %.6g <= %.6g'
                        % (inst, rep.lower_bound, rep.kappa, rep.upper_bound))
            eps = float(rng.uniform(0.05, 1.0))
            rep = sobolev.condition_bounds(lap, eps * np.eye(lap.n))
            gap = max(abs(rep.lower_bound - rep.kappa),
                      abs(rep.upper_bound - rep.kappa)) / rep.kappa
            worst_gap = max(worst_gap, gap)
            tally.check(gap <= 1e-8, 'instance %i: bounds differ from kappa '
                        'by %.3g for Psi = eps I' % (inst, gap))
        except GraphBGSError as e:
            tally.error('instance %i' % inst, e)
    tally.note('Psi = eps I: lower = kappa = upper within %.3g (relative)'
               % worst_gap)
    return tally.result()


def suite_weyl(rng, n_instances=VERIFY_PERTURB_INSTANCES,
               max_n=VERIFY_PERTURB_MAX_N, inject_fault=False):
    tally = _Tally('weyl')
    for inst in range(n_instances):
        try:
            lap = _random_lap(rng, 2, max_n)
            ok, _ = sobolev.weyl_check(lap, _perturbation(rng, lap.n,
                                                          inject_fault))
            tally.check(ok, 'instance %i: eigenvalue sandwich' % inst)
            eps = float(rng.uniform(0.05, 1.0))
            ok, triples = sobolev.weyl_check(lap, eps * np.eye(lap.n))
            lam = triples[:, 0] - eps
            shift = np.max(np.abs(triples[:, 1] - (lam + eps)))
            tally.check(ok and shift <= 1e-8 * max(1.0, np.max(triples[:, 1])),
                        'instance %i: shift by eps I' % inst)
        except GraphBGSError as e:
            tally.error('instance %i' % inst, e)
    return tally.result()


def _objective(lap, params, Z):
    return sum(sobolev.sobolev_quadratic(Z[:, q], lap, params)
               for q in range(Z.shape[1]))


def suite_solver(rng, n_instances=VERIFY_SOLVER_INSTANCES,
                 max_n=VERIFY_SOLVER_MAX_N,
                 optimality_max_n=VERIFY_OPTIMALITY_MAX_N,
                 n_interpolants=VERIFY_RANDOM_INTERPOLANTS):
    tally = _Tally('solver')
    params = sobolev.SobolevParams()
    try:
        p2 = graph_core.build_laplacian(graph_core.Graph(2, [0], [1], [1.0]))
        labels = sobolev.LabelMatrix([[1.0, 0.0], [0.0, 0.0]], [0])
        for method in ('closed', 'iterative'):
            Z = sobolev.solve(p2, labels, params, method).Z
            tally.check(abs(Z[0, 0] - 1) <= 1e-9 and
                        abs(Z[1, 0] - 5.0 / 6) <= 1e-9,
                        'two-node example with the %s method' % method)
    except GraphBGSError as e:
        tally.error('two-node example', e)
    worst = 0.0
    for inst in range(n_instances):
        try:
            lap = _random_lap(rng, 2, max_n)
            n = lap.n
            m = int(rng.integers(1, n + 1))
            S = synthetic.random_sampling(n, m, rng)
            classes = rng.integers(0, NUM_CLASSES, n)
            labels = sobolev.LabelMatrix.from_classes(classes, S)
            closed = sobolev.solve_closed_form(lap, labels, params)
            iterative = sobolev.solve_iterative(lap, labels, params)
            diff = float(np.max(np.abs(closed.Z - iterative.Z)))
            worst = max(worst, diff)
            tally.check(diff <= SOLVER_AGREEMENT_TOL,
                        'instance %i: closed vs iterative differ by %.3g'
                        % (inst, diff))
            tally.check(closed.interpolation_error(labels) <= INTERPOLATION_TOL,
                        'instance %i: interpolation' % inst)
            if n > optimality_max_n:
                continue
            best = _objective(lap, params, closed.Z)
            free = np.ones(n, dtype=bool)
            free[labels.sampled.indices] = False
            beaten = 0
            for _ in range(n_interpolants):
                W = rng.standard_normal(closed.Z.shape) * free[:, None]
                if _objective(lap, params, closed.Z + W) < best * (1 - 1e-12):
                    beaten += 1
            tally.check(beaten == 0, 'instance %i: %i random interpolants beat '
                        'the closed form' % (inst, beaten))
        except GraphBGSError as e:
            tally.error('instance %i' % inst, e)
    tally.note('worst closed vs iterative difference %.3g' % worst)
    return tally.result()


def suite_lemmas(rng, n_instances=20, max_n=VERIFY_PERTURB_MAX_N,
                 n_samples=VERIFY_LEMMA_SAMPLES):
    tally = _Tally('lemmas')
    for inst in range(n_instances):
        try:
            n = int(rng.integers(2, max_n + 1))
            A = rng.standard_normal((n, n))
            x = rng.standard_normal(n)
            ok, lhs, rhs = sobolev.operator_norm_check(A, x)
            tally.check(ok, 'instance %i: ||Ax|| = %.6g > %.6g'
                        % (inst, lhs, rhs))
            lap = _random_lap(rng, 2, max_n)
            M = lap.dense() + synthetic.random_spd(lap.n, rng)
            ok, observed, smin = sobolev.min_gain_check(
                M, n_samples, seed=int(rng.integers(0, 2 ** 31)))
            tally.check(ok, 'instance %i: min ||Mx|| = %.6g < sigma_min %.6g'
                        % (inst, observed, smin))
        except GraphBGSError as e:
            tally.error('instance %i' % inst, e)
    return tally.result()


def suite_monotonicity(rng, n_instances=20, max_n=VERIFY_PERTURB_MAX_N):
    tally = _Tally('monotonicity')
    eps = np.array([0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0])
    for inst in range(n_instances):
        try:
            lap = _random_lap(rng, 2, max_n)
            kappa = sobolev.kappa_curve(lap, eps)
            tally.check(bool(np.all(np.diff(kappa) < 0)),
                        'instance %i: kappa not decreasing in eps' % inst)
        except GraphBGSError as e:
            tally.error('instance %i' % inst, e)
    return tally.result()


def run_all(seed=DEF_MASTER_SEED, inject_fault=False, scale=1.0):
    """
    Runs every suite.

    :param seed: The master seed; every suite draws from its own stream.
    :param inject_fault: If True, the perturbation suites use a broken
                         (asymmetric) Psi, so they must fail.
    :param scale: Multiplies the instance counts (e.g. 0.1 for a quick run).
    :return: A list of SuiteResult.
    """
    def count(n):
        return max(1, int(round(n * scale)))

    results = [
        suite_spectral(derive_seed(seed, 'spectral'), count(50)),
        suite_recovery(derive_seed(seed, 'recovery'),
                       count(VERIFY_RECOVERY_INSTANCES)),
        suite_condition(derive_seed(seed, 'condition'),
                        count(VERIFY_PERTURB_INSTANCES),
                        inject_fault=inject_fault),
        suite_weyl(derive_seed(seed, 'weyl'), count(VERIFY_PERTURB_INSTANCES),
                   inject_fault=inject_fault),
        suite_solver(derive_seed(seed, 'solver'),
                     count(VERIFY_SOLVER_INSTANCES)),
        suite_lemmas(derive_seed(seed, 'lemmas'), count(20)),
        suite_monotonicity(derive_seed(seed, 'monotonicity'), count(20)),
    ]
    return results


def format_report(results):
    """
    :return: The report as a list of lines.
    """
    lines = []
    for r in results:
        status = 'PASS' if r.n_failed == 0 else 'FAIL'
        lines.append('%-13s %s  %i checks, %i failed'
                     % (r.name, status, r.n_checks, r.n_failed))
        lines.extend('    %s' % n for n in r.notes)
    total = sum(r.n_checks for r in results)
    failed = sum(r.n_failed for r in results)
    lines.append('%i checks, %i failed' % (total, failed))
    return lines
