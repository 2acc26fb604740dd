import json
import os
import shutil
import tempfile
import unittest
import numpy as np
from conf import *
import features
from features import FeatureLayout, FrameSequence, InstanceMask


def _seq(*frames):
    return FrameSequence([np.asarray(f, dtype=np.uint8) for f in frames],
                         'toy')


def _smooth(h=40, w=40, shift=0.0):
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    return 128 + 50 * np.sin((xx - shift) / 8.0) + 50 * np.cos(yy / 9.0)


class TestMedianBackground(unittest.TestCase):

    def test_constant(self):
        seq = _seq(*[np.full((4, 5), 7)] * 3)
        bg = features.median_background(seq)
        self.assertTrue(np.all(bg.image == 7))
        self.assertEqual(bg.frames_used, 3)

    def test_spike(self):
        seq = _seq(np.zeros((2, 2)), np.full((2, 2), 255), np.zeros((2, 2)))
        self.assertTrue(np.all(features.median_background(seq).image == 0))

    def test_even_count_takes_lower_middle(self):
        seq = _seq(*[np.full((2, 2), v) for v in (40, 10, 30, 20)])
        self.assertTrue(np.all(features.median_background(seq).image == 20))

    def test_identical_frames_idempotent(self):
        rng = np.random.default_rng(0)
        f = rng.integers(0, 256, (6, 7))
        seq = _seq(f, f, f, f)
        np.testing.assert_array_equal(features.median_background(seq).image, f)

    def test_stride(self):
        seq = _seq(*[np.full((2, 2), v) for v in (1, 200, 3, 200, 5)])
        bg = features.median_background(seq, stride=2)
        self.assertEqual(bg.frames_used, 3)
        self.assertTrue(np.all(bg.image == 3))


class TestLucasKanade(unittest.TestCase):

    def test_identical_frames(self):
        f = _smooth()
        flow = features.lucas_kanade(f, f)
        self.assertTrue(np.all(flow.vx == 0) and np.all(flow.vy == 0))

    def test_flat_frames(self):
        f = np.full((10, 10), 90.0)
        flow = features.lucas_kanade(f, f + 3)
        self.assertTrue(np.all(flow.vx == 0) and np.all(flow.vy == 0))

    def test_horizontal_shift(self):
        flow = features.lucas_kanade(_smooth(), _smooth(shift=1.0))
        inner = (slice(6, -6), slice(6, -6))
        self.assertLess(np.max(np.abs(flow.vx[inner] - 1.0)), 0.15)
        self.assertLess(np.max(np.abs(flow.vy[inner])), 0.15)

    def test_even_window(self):
        with self.assertRaises(ParameterError):
            features.lucas_kanade(_smooth(), _smooth(), window=4)


class TestLbp(unittest.TestCase):

    def test_uniform_table(self):
        table = features._uniform_lbp_table()
        self.assertEqual(len(set(table.tolist())), LBP_BINS)
        self.assertEqual(int(np.sum(table < LBP_BINS - 1)), 58)

    def test_constant_image(self):
        h = features.lbp_histogram(np.full((5, 5), 9))
        self.assertEqual(h[0], 1.0)

    def test_checkerboard(self):
        board = (np.indices((8, 8)).sum(axis=0) % 2) * 200
        codes = features.lbp_codes(board)[1:-1, 1:-1]
        inner = board[1:-1, 1:-1]
        self.assertTrue(np.all(codes[inner == 0] == LBP_BINS - 1))
        self.assertTrue(np.all(codes[inner == 200] == 0))
        interior = np.nonzero(np.pad(np.ones((6, 6)), 1))
        h = features.lbp_histogram(board, interior)
        self.assertEqual(h[LBP_BINS - 1], 0.5)
        self.assertEqual(h[0], 0.5)

    def test_normalized(self):
        rng = np.random.default_rng(1)
        h = features.lbp_histogram(rng.integers(0, 256, (9, 11)))
        self.assertEqual(len(h), LBP_BINS)
        self.assertAlmostEqual(h.sum(), 1.0, delta=1e-10)


class TestHistograms(unittest.TestCase):

    def test_zero_region(self):
        h = features.intensity_histogram(np.zeros((3, 3)), bins=32)
        self.assertEqual(h.tolist(), [1.0] + [0.0] * 31)

    def test_saturated(self):
        h = features.intensity_histogram(np.full((3, 3), 255), bins=32)
        self.assertEqual(h[-1], 1.0)

    def test_two_values(self):
        img = np.array([[0, 255], [255, 0]])
        h = features.intensity_histogram(img, bins=32)
        self.assertEqual(h[0], 0.5)
        self.assertEqual(h[-1], 0.5)

    def test_region(self):
        img = np.array([[0, 255], [255, 0]])
        h = features.intensity_histogram(img, (np.array([0]), np.array([1])),
                                         bins=4)
        self.assertEqual(h.tolist(), [0, 0, 0, 1])

    def test_flow_clipped_into_end_bins(self):
        h = features.flow_histogram([-100, 100, 0.1], 4, 8.0)
        self.assertAlmostEqual(h[0], 1.0 / 3)
        self.assertAlmostEqual(h[-1], 1.0 / 3)


class TestFlowStatistics(unittest.TestCase):

    def test_constant(self):
        self.assertEqual(features.flow_statistics([1, 1, 1]).tolist(),
                         [1, 1, 1, 0, 0, 0])

    def test_pair(self):
        self.assertEqual(features.flow_statistics([0, 2]).tolist(),
                         [0, 2, 1, 1, 1, 2])

    def test_symmetric(self):
        np.testing.assert_allclose(features.flow_statistics([-1, 0, 1]),
                                   [-1, 1, 0, np.sqrt(2.0 / 3), 2.0 / 3, 2])

    def test_scaling(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(20)
        s = features.flow_statistics(x)
        s3 = features.flow_statistics(3 * x)
        np.testing.assert_allclose(s3, 3 * s, atol=1e-12)

    def test_empty(self):
        with self.assertRaises(StructuralError):
            features.flow_statistics([])


class TestLayout(unittest.TestCase):

    def test_default_dimension(self):
        layout = FeatureLayout()
        self.assertEqual(layout.total_dim, 504)
        self.assertEqual(sum(size for _, size in layout.blocks()), 504)

    def test_dict(self):
        layout = FeatureLayout(of_hist_bins=16, intensity_bins=8,
                               flow_range=4.0)
        self.assertEqual(FeatureLayout.from_dict(layout.to_dict()), layout)
        self.assertEqual(layout.to_dict()['total_dim'],
                         2 * 22 + 4 * 8 + 4 * 59)

    def test_unsupported_lbp(self):
        with self.assertRaises(ParameterError):
            FeatureLayout(lbp_bins=10)


class TestInstanceMask(unittest.TestCase):

    def test_bitmap(self):
        bitmap = np.zeros((5, 6), dtype=bool)
        bitmap[1:3, 2:5] = True
        m = InstanceMask.from_bitmap(1, bitmap, 'x')
        self.assertEqual(m.size, 6)
        self.assertEqual(m.bounding_box, (1, 2, 3, 5))
        np.testing.assert_array_equal(m.as_bitmap((5, 6)), bitmap)

    def test_empty(self):
        with self.assertRaises(StructuralError):
            InstanceMask.from_bitmap(0, np.zeros((3, 3)), 'x')

    def test_out_of_frame(self):
        m = InstanceMask(1, [0, 4], [0, 0], 'x')
        with self.assertRaises(StructuralError):
            m.validate((4, 4))


class TestNodeFeatures(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(3)
        canvas = rng.integers(0, 256, (60, 60)).astype(float)
        canvas = np.clip(canvas * 0.2 + _smooth(60, 60), 0, 255)
        self.canvas = canvas
        frames = [canvas[5:45, 5 + t:45 + t] for t in range(3)]
        self.seq = FrameSequence(frames, 'toy')
        self.bg = features.median_background(self.seq)
        a = np.zeros((40, 40), dtype=bool)
        a[10:20, 12:22] = True
        b = np.zeros((40, 40), dtype=bool)
        b[25:32, 5:15] = True
        self.masks = [InstanceMask.from_bitmap(0, a, 'first'),
                      InstanceMask.from_bitmap(1, a, 'a1'),
                      InstanceMask.from_bitmap(1, b, 'b1'),
                      InstanceMask.from_bitmap(2, b, 'b2')]

    def test_shape_and_skip(self):
        X = features.build_node_features(self.seq, self.masks, self.bg,
                                         num_threads=2)
        self.assertEqual(X.n, 3)
        self.assertEqual(X.m, 504)
        self.assertEqual(X.node_ids, ('a1', 'b1', 'b2'))
        self.assertEqual(X.layout['total_dim'], 504)
        self.assertTrue(np.all(np.isfinite(X.data)))

    def test_histogram_blocks_normalized(self):
        layout = FeatureLayout()
        X = features.build_node_features(self.seq, self.masks, self.bg)
        start = 0
        for name, size in layout.blocks():
            block = X.data[:, start:start + size]
            if not name.endswith('_stats'):
                np.testing.assert_allclose(block.sum(axis=1), 1.0, atol=1e-10)
            start += size

    def test_permutation(self):
        X = features.build_node_features(self.seq, self.masks, self.bg)
        order = [3, 1, 2, 0]
        Y = features.build_node_features(self.seq,
                                         [self.masks[i] for i in order],
                                         self.bg)
        self.assertEqual(Y.node_ids, ('b2', 'a1', 'b1'))
        np.testing.assert_array_equal(Y.data, X.take([2, 0, 1]).data)

    def test_static_instance(self):
        f = self.canvas[:40, :40]
        seq = FrameSequence([f, f, f], 'static')
        bg = features.median_background(seq)
        a = np.zeros((40, 40), dtype=bool)
        a[10:20, 10:20] = True
        mask = InstanceMask.from_bitmap(1, a, 's')
        flow = features.lucas_kanade(seq[0], seq[1])
        layout = FeatureLayout()
        v = features.instance_features(mask, seq[1], seq[0], bg.image, flow,
                                       layout)
        stats = v[layout.of_hist_bins:layout.of_hist_bins + FLOW_STAT_COUNT]
        self.assertTrue(np.all(stats == 0))
        off = 2 * (layout.of_hist_bins + FLOW_STAT_COUNT)
        ib = layout.intensity_bins
        np.testing.assert_array_equal(v[off:off + ib],
                                      v[off + 2 * ib:off + 3 * ib])

    def test_translation_invariance(self):
        def vector(dr, dc):
            frames = [self.canvas[dr:dr + 40, dc + t:dc + t + 40]
                      for t in range(2)]
            a = np.zeros((40, 40), dtype=bool)
            a[15:25, 15:25] = True
            mask = InstanceMask.from_bitmap(1, a, 'x')
            bg = frames[0]
            flow = features.lucas_kanade(frames[0], frames[1])
            return features.instance_features(mask, frames[1], frames[0], bg,
                                              flow, FeatureLayout())
        base = vector(5, 5)
        # moving the view and the mask together: shift the mask back
        frames = [self.canvas[8:48, 7 + t:47 + t] for t in range(2)]
        a = np.zeros((40, 40), dtype=bool)
        a[12:22, 13:23] = True
        mask = InstanceMask.from_bitmap(1, a, 'x')
        flow = features.lucas_kanade(frames[0], frames[1])
        shifted = features.instance_features(mask, frames[1], frames[0],
                                             frames[0], flow, FeatureLayout())
        np.testing.assert_allclose(base, shifted, rtol=0, atol=1e-9)

    def test_too_few_instances(self):
        with self.assertRaises(DataError):
            features.build_node_features(self.seq, self.masks[:2], self.bg)

    def test_stack(self):
        X = features.build_node_features(self.seq, self.masks, self.bg)
        other = features.FeatureMatrix(X.data, ['o%i' % i for i in range(3)],
                                       X.layout)
        Y = features.stack_features([X, other])
        self.assertEqual(Y.n, 6)
        bad = features.FeatureMatrix(X.data[:, :10], ['p0', 'p1', 'p2'])
        with self.assertRaises(StructuralError):
            features.stack_features([X, bad])


class TestLoading(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.dir)

    def test_frames_and_png_masks(self):
        rng = np.random.default_rng(4)
        for t in (1, 2, 3):
            features.write_image(os.path.join(self.dir, 'input',
                                              'in%06i.png' % t),
                                 rng.integers(0, 256, (8, 9)))
        m = np.zeros((8, 9), dtype=np.uint8)
        m[2:4, 3:6] = 255
        features.write_image(os.path.join(self.dir, 'masks',
                                          'in000002_1.png'), m)
        features.write_image(os.path.join(self.dir, 'masks',
                                          'in000002_0.png'), m)
        features.write_image(os.path.join(self.dir, 'masks',
                                          'other_0.png'), m)
        seq = features.load_frames(os.path.join(self.dir, 'input'), 'toy')
        self.assertEqual(len(seq), 3)
        self.assertEqual(seq.names, ('in000001', 'in000002', 'in000003'))
        masks = features.load_masks(os.path.join(self.dir, 'masks'), seq)
        self.assertEqual([mk.instance_id for mk in masks],
                         ['toy:000001:0', 'toy:000001:1'])
        self.assertEqual(masks[0].frame_index, 1)
        self.assertEqual(masks[0].size, 6)

    def test_json_masks(self):
        seq = _seq(np.zeros((6, 6)), np.zeros((6, 6)))
        path = os.path.join(self.dir, 'masks.json')
        with open(path, 'w') as f:
            json.dump({'car': {'1': [[2, 1, 3], [3, 1, 2]]}}, f)
        masks = features.load_masks(path, seq)
        self.assertEqual(len(masks), 1)
        self.assertEqual(masks[0].size, 5)
        self.assertEqual(masks[0].bounding_box, (2, 1, 4, 4))

    def test_json_bad_frame(self):
        seq = _seq(np.zeros((6, 6)), np.zeros((6, 6)))
        path = os.path.join(self.dir, 'masks.json')
        with open(path, 'w') as f:
            json.dump({'car': {'5': [[2, 1, 3]]}}, f)
        with self.assertRaises(DataError):
            features.load_masks(path, seq)

    def test_color_to_gray(self):
        rgb = np.zeros((2, 2, 3), dtype=np.uint8)
        rgb[..., 0] = 255
        gray = features.to_gray(rgb)
        self.assertEqual(gray.shape, (2, 2))
        self.assertEqual(int(gray[0, 0]), 76)


if __name__ == '__main__':
    unittest.main()
