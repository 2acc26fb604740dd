"""
Monte Carlo cross-validation of the graph signal classifier over video
sequences, evaluated on unseen videos:

    for every target sequence with ground truth,
        for every density d of the plan,
            for every trial:
                sample ceil(d * |pool|) annotated frames of the OTHER
                sequences (without replacement), label every instance of
                those frames, solve on the whole graph, classify, and score
                the target sequence at the pixel level.

The graph is built once over every node and the solver factorization is
shared by all trials. Each trial draws from its own random stream derived
from (master seed, sequence, density index, trial), so the results do not
depend on how trials are scheduled over the worker threads.
"""

import collections
import csv
import numpy as np
import jinja2
from conf import *
import graph_core
import labeling
import sobolev
import statemon
import workerpool

_log = logger.setup_logger(__name__)

statemon.define('n_trials_run', int)
statemon.define('n_trials_skipped', int)

# create the jinja template environment
templateLoader = jinja2.FileSystemLoader(searchpath=TEMPLATE_DIR)
templateEnv = jinja2.Environment(loader=templateLoader, autoescape=True)

RESULT_FIELDS = ('sequence', 'density', 'trial', 'tp', 'fp', 'fn',
                 'precision', 'recall', 'f_measure', 'n_sampled', 'status')
SUMMARY_FIELDS = ('scope', 'name', 'category', 'density', 'count',
                  'precision', 'recall', 'f_measure')

TrialRecord = collections.namedtuple(
    'TrialRecord', ['sequence', 'density', 'trial', 'n_sampled', 'report'])


class ExperimentPlan(object):
    """
    The sampling densities (fractions of annotated frames) and the number of
    trials per density.
    """
    def __init__(self, densities=DEF_DENSITIES,
                 trials_per_density=DEF_TRIALS_PER_DENSITY):
        densities = tuple(float(d) for d in densities)
        if not densities:
            raise UsageError('The experiment plan has no densities')
        if not all(0 < d <= 1 for d in densities):
            raise UsageError('Densities must be in (0, 1], got %r'
                             % (densities,))
        if trials_per_density < 1:
            raise UsageError('trials_per_density must be >= 1')
        self.densities = densities
        self.trials_per_density = int(trials_per_density)

    def to_dict(self):
        return {'densities': list(self.densities),
                'trials_per_density': self.trials_per_density}

    @classmethod
    def from_dict(cls, d):
        d = d or {}
        return cls(d.get('densities', DEF_DENSITIES),
                   d.get('trials_per_density', DEF_TRIALS_PER_DENSITY))


class SequenceData(object):
    """
    The usable instance masks of one sequence (in node order), its ground
    truth frames, and an optional category for grouping.
    """
    def __init__(self, name, masks, gts, category=None):
        self.name = name
        self.masks = list(masks)
        self.gts = dict(gts)
        self.category = category or ''


class Experiment(object):
    """
    Everything trials share: the node layout over sequences, the node
    labels, and the solver.
    """
    def __init__(self, sequences, solver, rule=None):
        """
        :param sequences: SequenceData list, in the row order of the graph.
        :param solver: A SobolevSolver over the graph of every node.
        """
        self.sequences = list(sequences)
        self.solver = solver
        n = sum(len(s.masks) for s in self.sequences)
        if n != solver.lap.n:
            raise StructuralError('%i instances for a graph of %i nodes'
                                  % (n, solver.lap.n))
        self.offsets = {}
        start = 0
        classes = []
        for s in self.sequences:
            self.offsets[s.name] = (start, start + len(s.masks))
            start += len(s.masks)
            c, _ = labeling.label_nodes(s.masks, s.gts, rule)
            classes.append(c)
        self.classes = frozen(np.concatenate(classes))
        # (sequence, frame) -> labeled node indices
        self.frame_nodes = collections.OrderedDict()
        for s in self.sequences:
            lo, _ = self.offsets[s.name]
            for n, m in enumerate(s.masks):
                if self.classes[lo + n] == UNLABELED:
                    continue
                self.frame_nodes.setdefault((s.name, m.frame_index),
                                            []).append(lo + n)
        for s in self.sequences:
            for t in sorted(s.gts):
                self.frame_nodes.setdefault((s.name, t), [])

    def targets(self):
        return [s for s in self.sequences if s.gts]

    def pool(self, target):
        """
        :return: The annotated frames of every sequence but target, sorted.
        """
        return sorted(k for k in self.frame_nodes if k[0] != target)

    def run_trial(self, target, density_idx, density, trial, master_seed):
        rng = derive_seed(master_seed, target.name, density_idx, trial)
        pool = self.pool(target.name)
        n_frames = int(np.ceil(density * len(pool) - 1e-9)) if pool else 0
        n_frames = min(max(n_frames, 1 if pool else 0), len(pool))
        picked = rng.choice(len(pool), size=n_frames, replace=False) \
            if n_frames else []
        nodes = sorted(n for p in sorted(picked)
                       for n in self.frame_nodes[pool[p]])
        if not nodes:
            _log.warning('Trial %s/%g/%i sampled no labeled node; skipped'
                         % (target.name, density, trial))
            statemon.state.increment('n_trials_skipped')
            return TrialRecord(target.name, density, trial, 0, None)
        lo, hi = self.offsets[target.name]
        nodes = np.array(nodes, dtype=np.int64)
        if np.any((nodes >= lo) & (nodes < hi)):
            raise StructuralError('Sampled set of %s/%g/%i holds a node of '
                                  'the target sequence'
                                  % (target.name, density, trial))
        labels = sobolev.LabelMatrix.from_classes(self.classes, nodes)
        result = self.solver.solve(labels)
        predicted = result.labels[lo:hi]
        tp, fp, fn = labeling.pixel_confusion(target.masks, predicted,
                                              target.gts)
        statemon.state.increment('n_trials_run')
        report = labeling.EvalReport(tp, fp, fn, target.name, density, trial,
                                     master_seed, len(nodes))
        return TrialRecord(target.name, density, trial, len(nodes), report)


def run_experiment(X, sequences, plan=None, params=None, master_seed=0,
                   k=DEF_K, policy=DISCONNECTED_POLICY, method=DEF_METHOD,
                   tol=DEF_CG_TOL, max_iter=DEF_CG_MAX_ITER, rule=None,
                   num_threads=NUM_THREADS, graph=None):
    """
    Runs the cross-validation.

    :param X: The FeatureMatrix of every instance of every sequence, rows in
              sequence order.
    :param sequences: The SequenceData list matching the rows of X.
    :param plan: An ExperimentPlan.
    :param params: SobolevParams.
    :param master_seed: The seed every trial stream derives from.
    :param graph: An already built Graph over X (built here if None).
    :return: The TrialRecords, sorted by (sequence, density, trial).
    """
    plan = plan or ExperimentPlan()
    params = params or sobolev.SobolevParams()
    if graph is None:
        graph, _, _ = graph_core.build_graph(X, k, policy)
    lap = graph_core.build_laplacian(graph)
    solver = sobolev.SobolevSolver(lap, params, method, tol, max_iter)
    solver.prepare()
    exp = Experiment(sequences, solver, rule)
    targets = exp.targets()
    if not targets:
        raise DataError('No sequence has ground truth to evaluate')
    pool = workerpool.ThreadPool(0 if MIN_THREADS else num_threads)
    for target in targets:
        for di, density in enumerate(plan.densities):
            for trial in range(plan.trials_per_density):
                pool.add_task((target.name, di, trial), exp.run_trial, target,
                              di, density, trial, master_seed)
    try:
        records = [rec for _, rec in pool.wait_completion()]
    finally:
        pool.close()
    _log.info('Experiment done: %i trials over %i target sequences'
              % (len(records), len(targets)))
    return records


"""
SUMMARIES
"""


def _mean(values):
    return float(np.mean(values)) if values else None


def summarize(records, categories=None):
    """
    Aggregates trial records into summary rows:
        density     mean precision / recall / F over the trials of one
                    (sequence, density)
        best        per sequence, the density with the best mean F
        category    mean of the per-sequence best, per category
        overall     mean of the per-sequence best over every sequence

    :param records: TrialRecords.
    :param categories: A dict sequence -> category name.
    :return: A list of dicts keyed by SUMMARY_FIELDS.
    """
    categories = categories or {}
    by_key = collections.OrderedDict()
    for rec in records:
        by_key.setdefault((rec.sequence, rec.density), []).append(rec)
    rows = []
    best = collections.OrderedDict()
    for (seq, density), recs in by_key.items():
        ok = [r.report for r in recs if r.report is not None]
        row = {'scope': 'density', 'name': seq,
               'category': categories.get(seq, ''), 'density': density,
               'count': len(ok),
               'precision': _mean([r.precision for r in ok]),
               'recall': _mean([r.recall for r in ok]),
               'f_measure': _mean([r.f_measure for r in ok])}
        rows.append(row)
        if row['f_measure'] is None:
            continue
        if seq not in best or row['f_measure'] > best[seq]['f_measure']:
            best[seq] = dict(row, scope='best')
    rows.extend(best.values())
    groups = collections.OrderedDict()
    for row in best.values():
        groups.setdefault(row['category'], []).append(row)
    for cat, members in sorted(groups.items()):
        if not cat:
            continue
        rows.append(_group_row('category', cat, cat, members))
    if best:
        rows.append(_group_row('overall', 'all', '', list(best.values())))
    return rows


def _group_row(scope, name, category, members):
    return {'scope': scope, 'name': name, 'category': category,
            'density': '', 'count': len(members),
            'precision': _mean([m['precision'] for m in members]),
            'recall': _mean([m['recall'] for m in members]),
            'f_measure': _mean([m['f_measure'] for m in members])}


def _fmt(v):
    if v is None:
        return ''
    if isinstance(v, float):
        return FLOAT_STR % v
    return v


def write_results(path, records):
    """
    One row per trial; skipped trials have empty counts and metrics.
    """
    with open(path, 'w') as f:
        w = csv.writer(f, lineterminator='\n')
        w.writerow(RESULT_FIELDS)
        for rec in records:
            r = rec.report
            if r is None:
                w.writerow([rec.sequence, _fmt(rec.density), rec.trial, '', '',
                            '', '', '', '', rec.n_sampled, 'skipped'])
                continue
            w.writerow([rec.sequence, _fmt(rec.density), rec.trial, r.tp,
                        r.fp, r.fn, _fmt(r.precision), _fmt(r.recall),
                        _fmt(r.f_measure), rec.n_sampled, 'ok'])
    _log.info('Wrote %i trial results to %s' % (len(records), path))


def write_summary(path, rows):
    with open(path, 'w') as f:
        w = csv.writer(f, lineterminator='\n')
        w.writerow(SUMMARY_FIELDS)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in SUMMARY_FIELDS])


def render_curve(rows, width=640, height=400, margin=50):
    """
    Renders the mean F-measure per density of every sequence as an SVG line
    chart; densities are spaced evenly on the x axis.

    :param rows: The summary rows.
    :return: The SVG document as a string.
    """
    density_rows = [r for r in rows if r['scope'] == 'density' and
                    r['f_measure'] is not None]
    densities = sorted(set(r['density'] for r in density_rows))
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    step = plot_w / float(max(len(densities) - 1, 1))
    xpos = dict((d, margin + i * step) for i, d in enumerate(densities))
    palette = ('#1f77b4', '#d62728', '#2ca02c', '#ff7f0e', '#9467bd',
               '#8c564b', '#e377c2', '#7f7f7f')
    series = collections.OrderedDict()
    for r in density_rows:
        series.setdefault(r['name'], []).append(r)
    lines = []
    for n, (name, pts) in enumerate(series.items()):
        pts = sorted(pts, key=lambda r: r['density'])
        coords = [(xpos[p['density']],
                   margin + (1 - p['f_measure']) * plot_h) for p in pts]
        lines.append({'name': name, 'color': palette[n % len(palette)],
                      'points': ' '.join('%.1f,%.1f' % c for c in coords),
                      'coords': coords})
    ticks = [{'x': xpos[d], 'label': '%g%%' % (100 * d)} for d in densities]
    yticks = [{'y': margin + (1 - v) * plot_h, 'label': '%.1f' % v}
              for v in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)]
    template = templateEnv.get_template(CURVE_TEMPLATE)
    return template.render(width=width, height=height, margin=margin,
                           plot_w=plot_w, plot_h=plot_h, lines=lines,
                           ticks=ticks, yticks=yticks)


def write_curve(path, rows):
    with open(path, 'w') as f:
        f.write(render_curve(rows))
