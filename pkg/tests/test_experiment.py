import os
import shutil
import tempfile
import unittest
import numpy as np
from conf import *
import experiment
import graph_core
import sobolev
from experiment import ExperimentPlan, SequenceData, TrialRecord
from features import InstanceMask
from graph_core import FeatureMatrix
from labeling import EvalReport, GroundTruthFrame

N_FRAMES = 6
SHAPE = (10, 10)


def _box(frame, r0, r1, c0, c1, name):
    rr, cc = np.mgrid[r0:r1, c0:c1]
    return InstanceMask(frame, rr.ravel(), cc.ravel(), name)


def _toy(names=('a', 'b', 'c'), seed=3):
    """
    Sequences where every frame has a moving instance (features near +1) and
    a static one (features near -1).
    """
    rng = np.random.default_rng(seed)
    sequences, rows, ids = [], [], []
    for name in names:
        masks, gts = [], {}
        for t in range(N_FRAMES):
            masks.append(_box(t, 1, 4, 1, 4, '%s/%i/fg' % (name, t)))
            masks.append(_box(t, 6, 9, 6, 9, '%s/%i/bg' % (name, t)))
            rows.append(1 + 0.05 * rng.standard_normal(3))
            rows.append(-1 + 0.05 * rng.standard_normal(3))
            ids.extend([masks[-2].instance_id, masks[-1].instance_id])
            img = np.zeros(SHAPE, dtype=np.uint8)
            img[1:4, 1:4] = GT_MOVING
            gts[t] = GroundTruthFrame(t, img)
        sequences.append(SequenceData(name, masks, gts, 'toy'))
    return FeatureMatrix(np.array(rows), ids), sequences


class TestPlan(unittest.TestCase):

    def test_empty(self):
        with self.assertRaises(UsageError):
            ExperimentPlan(densities=())

    def test_bad_density(self):
        with self.assertRaises(UsageError):
            ExperimentPlan(densities=(0.0, 0.5))
        with self.assertRaises(UsageError):
            ExperimentPlan(densities=(1.5,))

    def test_bad_trials(self):
        with self.assertRaises(UsageError):
            ExperimentPlan(trials_per_density=0)

    def test_dict(self):
        plan = ExperimentPlan((0.1, 0.2), 3)
        again = ExperimentPlan.from_dict(plan.to_dict())
        self.assertEqual(again.densities, (0.1, 0.2))
        self.assertEqual(again.trials_per_density, 3)
        self.assertEqual(ExperimentPlan.from_dict(None).densities,
                         DEF_DENSITIES)


class TestRunExperiment(unittest.TestCase):

    def setUp(self):
        self.X, self.sequences = _toy()
        self.plan = ExperimentPlan((0.1, 0.5), 2)
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def _run(self, **kw):
        return experiment.run_experiment(self.X, self.sequences, self.plan,
                                         sobolev.SobolevParams(0.2, 1),
                                         master_seed=7, k=3, **kw)

    def test_separable_sequences_are_perfect(self):
        records = self._run()
        self.assertEqual(len(records), 3 * 2 * 2)
        for rec in records:
            self.assertIsNotNone(rec.report)
            self.assertEqual(rec.report.f_measure, 1.0)
            self.assertEqual(rec.report.fp, 0)

    def test_sampling_size(self):
        records = self._run()
        # the pool of a target is the 12 annotated frames of the two other
        # sequences, two labeled nodes each
        for rec in records:
            frames = int(np.ceil(rec.density * 2 * N_FRAMES - 1e-9))
            self.assertEqual(rec.n_sampled, 2 * frames)

    def test_results_are_reproducible(self):
        first = os.path.join(self.tmp, 'first.csv')
        second = os.path.join(self.tmp, 'second.csv')
        experiment.write_results(first, self._run(num_threads=4))
        experiment.write_results(second, self._run(num_threads=1))
        with open(first, 'rb') as f, open(second, 'rb') as g:
            self.assertEqual(f.read(), g.read())

    def test_target_never_sampled(self):
        solver = sobolev.SobolevSolver(_path_laplacian(self.X.n))
        exp = experiment.Experiment(self.sequences, solver)
        for target in exp.targets():
            pool = exp.pool(target.name)
            self.assertEqual(len(pool), 2 * N_FRAMES)
            self.assertFalse(any(k[0] == target.name for k in pool))

    def test_target_node_in_sampled_set(self):
        solver = sobolev.SobolevSolver(_path_laplacian(self.X.n))
        exp = experiment.Experiment(self.sequences, solver)
        target = exp.targets()[0]
        for key in exp.pool(target.name):
            exp.frame_nodes[key].append(exp.offsets[target.name][0])
        with self.assertRaises(StructuralError):
            exp.run_trial(target, 0, 1.0, 0, 7)

    def test_sequence_graph_mismatch(self):
        solver = sobolev.SobolevSolver(_path_laplacian(5))
        with self.assertRaises(StructuralError):
            experiment.Experiment(self.sequences, solver)

    def test_no_ground_truth(self):
        for s in self.sequences:
            s.gts = {}
        with self.assertRaises(DataError):
            self._run()


def _path_laplacian(n):
    graph = graph_core.Graph(n, np.arange(n - 1), np.arange(1, n),
                             np.ones(n - 1))
    return graph_core.build_laplacian(graph)


def _record(seq, density, trial, tp, fp, fn):
    return TrialRecord(seq, density, trial, 4,
                       EvalReport(tp, fp, fn, seq, density, trial))


class TestSummaries(unittest.TestCase):

    def setUp(self):
        self.records = [
            _record('a', 0.1, 0, 1, 1, 0),  # F = 2/3
            _record('a', 0.1, 1, 1, 0, 0),  # F = 1
            _record('a', 0.5, 0, 1, 0, 1),  # F = 2/3
            _record('b', 0.1, 0, 0, 1, 1),  # F = 0
            TrialRecord('b', 0.5, 0, 0, None),
        ]
        self.rows = experiment.summarize(self.records, {'a': 'x', 'b': 'y'})

    def _rows(self, scope):
        return [r for r in self.rows if r['scope'] == scope]

    def test_density_rows(self):
        dens = self._rows('density')
        self.assertEqual(len(dens), 4)
        a01 = [r for r in dens if r['name'] == 'a' and r['density'] == 0.1][0]
        self.assertEqual(a01['count'], 2)
        self.assertAlmostEqual(a01['f_measure'], (2.0 / 3 + 1) / 2)
        skipped = [r for r in dens if r['name'] == 'b' and
                   r['density'] == 0.5][0]
        self.assertEqual(skipped['count'], 0)
        self.assertIsNone(skipped['f_measure'])

    def test_best_and_overall(self):
        best = dict((r['name'], r) for r in self._rows('best'))
        self.assertEqual(best['a']['density'], 0.1)
        self.assertEqual(best['b']['f_measure'], 0.0)
        self.assertEqual(len(self._rows('category')), 2)
        overall = self._rows('overall')[0]
        self.assertAlmostEqual(overall['f_measure'], (5.0 / 6) / 2)

    def test_write(self):
        tmp = tempfile.mkdtemp()
        try:
            path = os.path.join(tmp, SUMMARY_FILE)
            experiment.write_summary(path, self.rows)
            with open(path) as f:
                lines = f.read().splitlines()
            self.assertEqual(lines[0], ','.join(experiment.SUMMARY_FIELDS))
            self.assertEqual(len(lines), len(self.rows) + 1)
            path = os.path.join(tmp, RESULTS_FILE)
            experiment.write_results(path, self.records)
            with open(path) as f:
                lines = f.read().splitlines()
            self.assertTrue(lines[-1].endswith('skipped'))
        finally:
            shutil.rmtree(tmp)

    def test_curve(self):
        svg = experiment.render_curve(self.rows)
        self.assertIn('<svg', svg)
        self.assertIn('a', svg)
        self.assertIn('10%', svg)
        self.assertIn('50%', svg)


if __name__ == '__main__':
    unittest.main()
