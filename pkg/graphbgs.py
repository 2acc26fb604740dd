#!/usr/bin/env python
"""
The graphbgs command line tool. Every pipeline stage is a subcommand:

    synth        write the synthetic two-sequence dataset and its config
    features     frames + instance masks -> node feature file
    graph        feature file -> k-NN graph file (+ connectivity report)
    solve        graph + labels CSV -> recovered scores and class decisions
    sample       draw a uniform random sampling set
    recover      graph + sampling set + signal -> recovered signal
    spectral     graph -> eigenvalues (and eigenvectors) CSV
    experiment   run the Monte Carlo cross-validation of a config
    verify       run the theorem and invariant suites on random graphs

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical or
convergence error, 4 verification failure.
"""

import argparse
import json
import logging
import sys
import numpy as np
from conf import *
import experiment
import features
import graph_core
import labeling
import pipeline_config
import sampling_recovery
import sobolev
import spectral
import statemon
import storage
import synthetic
import verification

_log = logger.setup_logger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """
    argparse exits with status 2 on bad usage; graphbgs reserves 2 for data
    errors, so usage errors are raised instead.
    """
    def error(self, message):
        raise UsageError('%s: %s' % (self.prog, message))


"""
LOADING
"""


def load_sequences(config, with_gt=True):
    """
    Loads the frames, the usable instance masks and (optionally) the ground
    truth of every sequence of the config.

    :return: A list of (FrameSequence, masks, gts, sequence entry).
    """
    if not config.sequences:
        raise UsageError('The config names no sequences')
    out = []
    for entry in config.sequences:
        seq = features.load_frames(config.resolve(entry['frames']),
                                   entry['name'])
        masks = features.usable_masks(features.load_masks(
            config.resolve(entry['masks']), seq))
        gts = {}
        if with_gt and entry.get('gt'):
            gts = labeling.load_ground_truth(config.resolve(entry['gt']), seq)
        out.append((seq, masks, gts, entry))
    return out


def compute_features(config, loaded):
    """
    :return: The stacked FeatureMatrix of every loaded sequence.
    """
    matrices = []
    for seq, masks, _, _ in loaded:
        bg = features.median_background(seq, config.median_stride)
        matrices.append(features.build_node_features(
            seq, masks, bg, config.layout, config.lk_window,
            config.num_threads))
    return features.stack_features(matrices)


def _graph_report(bw, report):
    return {'n_nodes': bw.node_count,
            'k': report.k,
            'sigma': bw.sigma,
            'edge_count': bw.edge_count,
            'n_components_before': report.n_components_before,
            'component_sizes': [int(s) for s in report.component_sizes],
            'bridges': [[int(i), int(j), float(d)]
                        for i, j, d in report.bridges]}


"""
SUBCOMMANDS
"""


def cmd_synth(out, n_frames=30, seed=DEF_MASTER_SEED):
    return synthetic.write_dataset(out, n_frames, seed)


def cmd_features(config, out=None):
    """
    Computes the node features of every sequence of the config.

    :return: The path of the feature file.
    """
    X = compute_features(config, load_sequences(config, with_gt=False))
    path = out or config.output(FEATURES_FILE)
    storage.write_features(path, X)
    _log.info('Wrote %i x %i features to %s' % (X.n, X.m, path))
    return path


def cmd_graph(config, features_path=None, out=None):
    """
    Builds the k-NN graph over a feature file.

    :return: The path of the graph file.
    """
    X = storage.load_features(features_path or config.output(FEATURES_FILE))
    G, bw, report = graph_core.build_graph(X, config.k, config.policy,
                                           config.counting)
    path = out or config.output(GRAPH_FILE)
    storage.write_graph(path, G)
    with open(path + '.report.json' if out else
              config.output(GRAPH_REPORT_FILE), 'w') as f:
        json.dump(_graph_report(bw, report), f, indent=2, sort_keys=True)
    return path


def cmd_solve(config, graph_path, labels_path, out=None):
    """
    Recovers the class scores of every node from the labels of the sampled
    nodes.

    :param labels_path: CSV of node_id,class,sampled, one row per graph node
                        in node order.
    :return: The path of the decisions CSV.
    """
    G = storage.read_graph(graph_path)
    rows = storage.read_labels(labels_path)
    if len(rows) != G.n_nodes:
        raise DataError('%s has %i rows for a graph of %i nodes'
                        % (labels_path, len(rows), G.n_nodes))
    node_ids = [r[0] for r in rows]
    classes = np.array([UNLABELED if r[1] is None else r[1] for r in rows],
                       dtype=np.int64)
    sampled = [n for n, r in enumerate(rows) if r[2]]
    if not sampled:
        raise DataError('%s marks no node as sampled' % labels_path)
    labels = sobolev.LabelMatrix.from_classes(classes, sampled)
    lap = graph_core.build_laplacian(G)
    solver = sobolev.SobolevSolver(lap, config.params(), config.method,
                                   config.tol, config.max_iter)
    result = solver.solve(labels)
    path = out or config.output(DECISIONS_FILE)
    storage.write_decisions(path, node_ids, result.Z, result.labels)
    _log.info('Solved %i nodes from %i labels with the %s method'
              % (G.n_nodes, len(sampled), result.method))
    return path


def cmd_sample(n_nodes, density, seed, out):
    S = sampling_recovery.sample_uniform(n_nodes, density, seed)
    storage.write_sampling_set(out, S, seed, density)
    return out


def cmd_recover(graph_path, sampling_path, signal_path, kind, out, rho=None,
                eta=DEF_ETA):
    """
    Recovers a full graph signal from its samples. The signal file holds the
    whole signal; only its values on the sampling set are used.

    :return: The path of the recovered signal CSV.
    """
    G = storage.read_graph(graph_path)
    node_ids, y = storage.read_vector(signal_path)
    if len(y) != G.n_nodes:
        raise DataError('%s has %i values for a graph of %i nodes'
                        % (signal_path, len(y), G.n_nodes))
    indices, _ = storage.read_sampling_set(sampling_path)
    S = sampling_recovery.SamplingSet(indices, G.n_nodes)
    op = sampling_recovery.RecoveryOperator(kind, rho, eta)
    lap = graph_core.build_laplacian(G)
    basis = None if kind == 'puy-regularized' else \
        spectral.eigendecompose(lap)
    y_hat = op.apply(S, sampling_recovery.decimate(y, S), basis, lap)
    storage.write_vector(out, node_ids, y_hat, 'recovered')
    return out


def cmd_spectral(graph_path, out, with_vectors=False):
    lap = graph_core.build_laplacian(storage.read_graph(graph_path))
    spectral.write_spectrum_csv(spectral.eigendecompose(lap), out,
                                with_vectors)
    return out


def cmd_experiment(config):
    """
    Runs the cross-validation of every sequence of the config.

    :return: The path of the results CSV.
    """
    loaded = load_sequences(config)
    X = compute_features(config, loaded)
    G, _, _ = graph_core.build_graph(X, config.k, config.policy,
                                     config.counting)
    sequences = [experiment.SequenceData(entry['name'], masks, gts,
                                         entry.get('category'))
                 for _, masks, gts, entry in loaded]
    records = experiment.run_experiment(
        X, sequences, config.plan, config.params(), config.master_seed,
        config.k, config.policy, config.method, config.tol, config.max_iter,
        num_threads=config.num_threads, graph=G)
    rows = experiment.summarize(records, dict(
        (s.name, s.category) for s in sequences))
    path = config.output(RESULTS_FILE)
    experiment.write_results(path, records)
    experiment.write_summary(config.output(SUMMARY_FILE), rows)
    experiment.write_curve(config.output(CURVE_FILE), rows)
    config.save(config.output(CONFIG_FILE))
    for row in rows:
        if row['scope'] == 'best':
            _log.info('%s: best mean F-measure %.4f at density %g'
                      % (row['name'], row['f_measure'], row['density']))
    return path


def cmd_verify(seed=DEF_MASTER_SEED, inject_fault=False, scale=1.0,
               stream=None):
    """
    Runs the verification suites and prints their report.

    :raises VerificationError: if any check failed.
    """
    stream = stream or sys.stdout
    results = verification.run_all(seed, inject_fault, scale)
    for line in verification.format_report(results):
        stream.write(line + '\n')
    failed = sum(r.n_failed for r in results)
    if failed:
        raise VerificationError('%i verification checks failed' % failed)
    return results


"""
COMMAND LINE
"""


def _config_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument('--config', help='the JSON pipeline config')
    p.add_argument('--workdir', help='where outputs are written')
    p.add_argument('--threads', dest='num_threads', type=int,
                   help='worker threads (default %i)' % NUM_THREADS)
    return p


def _graph_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument('--k', type=int, help='neighbours per node (default %i, '
                   'capped at N-1)' % DEF_K)
    p.add_argument('--policy', choices=('connect', 'error'),
                   help='what to do with a disconnected graph (default %s)'
                   % DISCONNECTED_POLICY)
    p.add_argument('--counting', choices=('undirected', 'directed'),
                   help='edge counting of the kernel bandwidth (default %s)'
                   % SIGMA_EDGE_COUNTING)
    return p


def _solver_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument('--epsilon', type=float,
                   help='Laplacian shift, > 0 (default %g)' % DEF_EPSILON)
    p.add_argument('--beta', type=float,
                   help='Sobolev exponent, > 0 (default %g)' % DEF_BETA)
    p.add_argument('--method', choices=sobolev.METHODS,
                   help='solver (default %s: closed form up to N=%i)'
                   % (DEF_METHOD, CLOSED_FORM_LIMIT))
    p.add_argument('--weighting', choices=sobolev.WEIGHTINGS,
                   help='objective weighting (default %s)' % DEF_WEIGHTING)
    p.add_argument('--tol', type=float,
                   help='relative residual of the iterative solver '
                   '(default %g)' % DEF_CG_TOL)
    p.add_argument('--max-iter', dest='max_iter', type=int,
                   help='iteration cap of the iterative solver (default %i)'
                   % DEF_CG_MAX_ITER)
    return p


def build_parser():
    parser = _ArgumentParser(
        prog='graphbgs',
        description='Semi-supervised background/foreground classification of '
                    'video object instances by graph signal recovery.',
        epilog='Formats: features are a binary container (magic GBGSFEAT) or '
               'a CSV of node_id,f_1..f_M; graphs are "# nodes=N" followed '
               'by "i j w" lines; labels are CSV node_id,class,sampled; '
               'signals are CSV node_id,value; sampling sets are CSV with a '
               '"# seed=, density=, n_nodes=" line. The workdir can also be '
               'set with $%s.' % WORKDIR_ENV)
    parser.add_argument('--log-file', help='also log to this file')
    parser.add_argument('--quiet', action='store_true',
                        help='only log warnings and errors to the console')
    sub = parser.add_subparsers(dest='command', metavar='command',
                                parser_class=_ArgumentParser)
    sub.required = True
    config, graph, solver = _config_flags(), _graph_flags(), _solver_flags()

    p = sub.add_parser('synth', help='write the synthetic dataset')
    p.add_argument('out', help='the dataset directory')
    p.add_argument('--frames', type=int, default=30)
    p.add_argument('--seed', type=int, default=DEF_MASTER_SEED)

    p = sub.add_parser('features', parents=[config],
                       help='compute the node features')
    p.add_argument('--out', help='the feature file (default workdir/%s)'
                   % FEATURES_FILE)

    p = sub.add_parser('graph', parents=[config, graph],
                       help='build the k-NN graph')
    p.add_argument('--features', help='feature file, binary or CSV (default '
                   'workdir/%s)' % FEATURES_FILE)
    p.add_argument('--out', help='the graph file (default workdir/%s)'
                   % GRAPH_FILE)

    p = sub.add_parser('solve', parents=[config, solver],
                       help='recover the node classes from sampled labels')
    p.add_argument('--graph', help='graph file (default workdir/%s)'
                   % GRAPH_FILE)
    p.add_argument('labels', help='CSV of node_id,class,sampled')
    p.add_argument('--out', help='decisions CSV (default workdir/%s)'
                   % DECISIONS_FILE)

    p = sub.add_parser('sample', help='draw a uniform random sampling set')
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument('--n-nodes', type=int)
    group.add_argument('--graph', help='take N from this graph file')
    p.add_argument('--density', type=float, required=True)
    p.add_argument('--seed', type=int, default=DEF_MASTER_SEED)
    p.add_argument('--out', required=True)

    p = sub.add_parser('recover', help='recover a signal from its samples')
    p.add_argument('--graph', required=True)
    p.add_argument('--sampling', required=True, help='sampling set CSV')
    p.add_argument('--signal', required=True, help='CSV of node_id,value')
    p.add_argument('--kind', choices=sampling_recovery.KINDS,
                   default='chen-exact')
    p.add_argument('--rho', type=int, help='bandwidth (spectral kinds)')
    p.add_argument('--eta', type=float, default=DEF_ETA)
    p.add_argument('--out', required=True)

    p = sub.add_parser('spectral', help='dump the Laplacian spectrum')
    p.add_argument('--graph', required=True)
    p.add_argument('--vectors', action='store_true',
                   help='also write the eigenvectors')
    p.add_argument('--out', required=True)

    p = sub.add_parser('experiment', help='Monte Carlo cross-validation')
    exp_sub = p.add_subparsers(dest='action', metavar='action',
                               parser_class=_ArgumentParser)
    exp_sub.required = True
    run = exp_sub.add_parser('run', parents=[config, graph, solver],
                             help='run the experiment of a config')
    run.add_argument('--seed', dest='master_seed', type=int,
                     help='the master seed (default: from the config)')
    run.add_argument('--densities', type=float, nargs='+')
    run.add_argument('--trials', dest='trials_per_density', type=int)

    p = sub.add_parser('verify', help='run the verification suites')
    p.add_argument('--seed', type=int, default=DEF_MASTER_SEED)
    p.add_argument('--inject-fault', action='store_true',
                   help='use an asymmetric perturbation, so the suites fail')
    p.add_argument('--scale', type=float, default=1.0,
                   help='multiplies the number of random instances')
    return parser


_OVERRIDES = ('workdir', 'num_threads', 'k', 'policy', 'counting', 'epsilon',
              'beta', 'method', 'weighting', 'tol', 'max_iter', 'master_seed',
              'densities', 'trials_per_density')


def load_config(args):
    """
    The config file, overridden by the environment and then by the flags.
    """
    config = pipeline_config.load(getattr(args, 'config', None))
    return config.override(**dict((k, getattr(args, k, None))
                                  for k in _OVERRIDES))


def dispatch(args):
    cmd = args.command
    if cmd == 'synth':
        return cmd_synth(args.out, args.frames, args.seed)
    if cmd == 'sample':
        n = args.n_nodes
        if n is None:
            n = storage.read_graph(args.graph).n_nodes
        return cmd_sample(n, args.density, args.seed, args.out)
    if cmd == 'recover':
        return cmd_recover(args.graph, args.sampling, args.signal, args.kind,
                           args.out, args.rho, args.eta)
    if cmd == 'spectral':
        return cmd_spectral(args.graph, args.out, args.vectors)
    if cmd == 'verify':
        return cmd_verify(args.seed, args.inject_fault, args.scale)
    config = load_config(args)
    if cmd == 'features':
        return cmd_features(config, args.out)
    if cmd == 'graph':
        return cmd_graph(config, args.features, args.out)
    if cmd == 'solve':
        return cmd_solve(config, args.graph or config.output(GRAPH_FILE),
                         args.labels, args.out)
    if cmd == 'experiment':
        return cmd_experiment(config)
    raise UsageError('Unknown command %r' % cmd)


def main(argv=None):
    """
    Runs one subcommand.

    :return: The exit code.
    """
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        _log.error(str(e))
        return e.exit_code
    logger.config_root_logger(args.log_file)
    if args.quiet:
        logger.set_console_level(logging.WARNING)
    code = EXIT_OK
    try:
        dispatch(args)
    except GraphBGSError as e:
        _log.error('%s: %s' % (type(e).__name__, e))
        code = e.exit_code
    except MemoryError as e:
        _log.error('Out of memory: %s' % e)
        code = EXIT_NUMERICAL
    _log.info('Counters: %s' % json.dumps(statemon.state.snapshot(),
                                          sort_keys=True))
    return code


if __name__ == '__main__':
    sys.exit(main())
