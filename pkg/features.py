"""
Builds the per-instance node feature vectors from video frames, instance
masks produced by an external segmenter, and a temporal median background.

For an instance v in frame t, with pixel set P_v and bounding box crop, the
vector is the concatenation, in this order, of

    vx histogram, vx statistics (6), vy histogram, vy statistics (6)
        -- Lucas-Kanade flow of frame t against t-1, over P_v
    intensity histograms of I_t, I_{t-1}, B and |I_t - B|
        -- over P_v
    uniform LBP histograms of I_t, I_{t-1}, B and |I_t - B|
        -- over the bounding box crops

so its length is 2 (of_hist_bins + 6) + 4 intensity_bins + 4 lbp_bins.
Instances on the first frame have no predecessor and are skipped.

Mask inputs:
    PNG     one binary image per instance, named '<frame-stem>_<k>.png' where
            <frame-stem> is the stem of the frame file (nonzero = instance)
    JSON    {instance_id: {frame_index: [[row, col_start, length], ...]}}
            with 0-based frame indices into the sequence
"""

import json
import os
import numpy as np
from PIL import Image
from scipy import ndimage
from conf import *
import statemon
import workerpool
from graph_core import FeatureMatrix

_log = logger.setup_logger(__name__)

statemon.define('n_masks_skipped', int)
statemon.define('n_flow_fields', int)

# circular neighbour order for the 8-neighbour, radius 1 pattern
_LBP_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1),
                (0, -1))


def _uniform_lbp_table():
    """
    Maps every 8-bit pattern to its histogram bin: the 58 patterns with at
    most two circular 0/1 transitions get bins 0..57 in increasing code
    order, everything else the catch-all bin 58.
    """
    table = np.full(256, LBP_BINS - 1, dtype=np.int64)
    nxt = 0
    for code in range(256):
        bits = [(code >> i) & 1 for i in range(LBP_NEIGHBOURS)]
        transitions = sum(bits[i] != bits[(i + 1) % LBP_NEIGHBOURS]
                          for i in range(LBP_NEIGHBOURS))
        if transitions <= 2:
            table[code] = nxt
            nxt += 1
    return table


_LBP_TABLE = _uniform_lbp_table()


"""
TYPES
"""


class FrameSequence(object):
    """
    An ordered list of grayscale 8-bit frames of one video.
    """
    def __init__(self, frames, sequence_id, names=None):
        """
        :param frames: A list of H x W arrays (color frames are converted).
        :param sequence_id: The name of the sequence.
        :param names: Optional frame file stems, one per frame.
        """
        frames = [to_gray(f) for f in frames]
        if len(frames) < 2:
            raise StructuralError('Sequence %s needs at least 2 frames, got %i'
                                  % (sequence_id, len(frames)))
        shape = frames[0].shape
        for n, f in enumerate(frames):
            if f.shape != shape:
                raise StructuralError('Frame %i of %s is %s, expected %s'
                                      % (n, sequence_id, f.shape, shape))
        self.frames = tuple(frozen(f) for f in frames)
        self.sequence_id = sequence_id
        if names is None:
            names = ['%06i' % n for n in range(len(frames))]
        self.names = tuple(names)

    @property
    def shape(self):
        return self.frames[0].shape

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, t):
        return self.frames[t]


class InstanceMask(object):
    """
    The pixel set of one instance on one frame.
    """
    def __init__(self, frame_index, rows, cols, instance_id, shape=None):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        if len(rows) == 0 or len(rows) != len(cols):
            raise StructuralError('Instance %s has an empty pixel set'
                                  % instance_id)
        if rows.min() < 0 or cols.min() < 0:
            raise StructuralError('Instance %s has negative pixel coordinates'
                                  % instance_id)
        if shape is not None and (rows.max() >= shape[0] or
                                  cols.max() >= shape[1]):
            raise StructuralError('Instance %s is out of the %s frame'
                                  % (instance_id, shape))
        self.frame_index = int(frame_index)
        self.rows = frozen(rows)
        self.cols = frozen(cols)
        self.instance_id = str(instance_id)

    @classmethod
    def from_bitmap(cls, frame_index, bitmap, instance_id):
        rows, cols = np.nonzero(np.asarray(bitmap))
        return cls(frame_index, rows, cols, instance_id, np.shape(bitmap))

    @property
    def size(self):
        return len(self.rows)

    @property
    def pixels(self):
        """
        :return: The (rows, cols) index tuple, usable to index an image.
        """
        return self.rows, self.cols

    @property
    def bounding_box(self):
        """
        :return: (row0, col0, row1, col1), the tight box, end exclusive.
        """
        return (int(self.rows.min()), int(self.cols.min()),
                int(self.rows.max()) + 1, int(self.cols.max()) + 1)

    def as_bitmap(self, shape):
        out = np.zeros(shape, dtype=bool)
        out[self.rows, self.cols] = True
        return out

    def validate(self, shape):
        if self.rows.max() >= shape[0] or self.cols.max() >= shape[1]:
            raise StructuralError('Instance %s is out of the %s frame'
                                  % (self.instance_id, shape))


class BackgroundModel(object):
    def __init__(self, image, frames_used, stride):
        self.image = frozen(image)
        self.frames_used = frames_used
        self.stride = stride


class FlowField(object):
    """
    Per-pixel flow (vx, vy) of a frame relative to its predecessor.
    """
    def __init__(self, vx, vy):
        self.vx = frozen(vx)
        self.vy = frozen(vy)


class FeatureLayout(object):
    """
    The block sizes of a node feature vector.
    """
    def __init__(self, of_hist_bins=DEF_OF_HIST_BINS,
                 intensity_bins=DEF_INTENSITY_BINS, lbp_bins=LBP_BINS,
                 flow_range=DEF_FLOW_RANGE, lbp_variant=LBP_VARIANT,
                 stat_count=FLOW_STAT_COUNT):
        if of_hist_bins < 1 or intensity_bins < 1:
            raise ParameterError('Histogram bin counts must be >= 1')
        if lbp_variant != LBP_VARIANT or lbp_bins != LBP_BINS:
            raise ParameterError('Only the %s LBP with %i bins is supported'
                                 % (LBP_VARIANT, LBP_BINS))
        if stat_count != FLOW_STAT_COUNT:
            raise ParameterError('stat_count is fixed at %i' % FLOW_STAT_COUNT)
        if not flow_range > 0:
            raise ParameterError('flow_range must be positive')
        self.of_hist_bins = int(of_hist_bins)
        self.intensity_bins = int(intensity_bins)
        self.lbp_bins = int(lbp_bins)
        self.flow_range = float(flow_range)
        self.lbp_variant = lbp_variant
        self.stat_count = int(stat_count)

    @property
    def total_dim(self):
        return (2 * (self.of_hist_bins + self.stat_count) +
                4 * self.intensity_bins + 4 * self.lbp_bins)

    def blocks(self):
        """
        :return: [(block name, size), ...] in vector order.
        """
        out = []
        for axis in ('vx', 'vy'):
            out.append(('%s_hist' % axis, self.of_hist_bins))
            out.append(('%s_stats' % axis, self.stat_count))
        for src in ('curr', 'prev', 'background', 'absdiff'):
            out.append(('intensity_%s' % src, self.intensity_bins))
        for src in ('curr', 'prev', 'background', 'absdiff'):
            out.append(('lbp_%s' % src, self.lbp_bins))
        return out

    def to_dict(self):
        return {'of_hist_bins': self.of_hist_bins,
                'intensity_bins': self.intensity_bins,
                'lbp_bins': self.lbp_bins,
                'flow_range': self.flow_range,
                'lbp_variant': self.lbp_variant,
                'stat_count': self.stat_count,
                'total_dim': self.total_dim}

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        d.pop('total_dim', None)
        return cls(**d)

    def __eq__(self, other):
        return isinstance(other, FeatureLayout) and \
            self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self == other


"""
LOADING
"""


def to_gray(img):
    """
    Converts an image to 8-bit grayscale with the ITU-R 601 luma transform
    (Pillow's 'L' conversion). Grayscale input is only range checked.
    """
    img = np.asarray(img)
    if img.ndim == 3:
        if img.shape[2] == 4:
            img = img[:, :, :3]
        return np.asarray(Image.fromarray(img.astype(np.uint8)).convert('L'))
    if img.ndim != 2:
        raise StructuralError('Frames must be H x W or H x W x 3')
    if img.dtype != np.uint8:
        if img.min() < 0 or img.max() > 255:
            raise StructuralError('Grayscale frames must be in [0, 255]')
        img = np.round(img).astype(np.uint8)
    return img


def read_image(path):
    try:
        with Image.open(path) as im:
            if im.mode not in ('L', 'RGB'):
                im = im.convert('RGB')
            return np.asarray(im)
    except (IOError, OSError) as e:
        raise DataError('Cannot read image %s: %s' % (path, e))


def write_image(path, img):
    """
    Writes an 8-bit grayscale (or RGB) array as an image; the format follows
    the extension.
    """
    folder = os.path.dirname(path)
    if folder:
        ensure_dir(folder)
    Image.fromarray(np.asarray(img, dtype=np.uint8)).save(path)


def load_frames(directory, sequence_id=None):
    """
    Loads every frame image of a directory, ordered by filename.

    :return: A FrameSequence.
    """
    paths = list_numbered_files(directory, FRAME_EXTENSIONS)
    if sequence_id is None:
        sequence_id = os.path.basename(os.path.normpath(directory))
    names = [os.path.splitext(os.path.basename(p))[0] for p in paths]
    _log.info('Loading %i frames of %s' % (len(paths), sequence_id))
    return FrameSequence([read_image(p) for p in paths], sequence_id, names)


def instance_id(sequence_id, frame_index, k):
    return '%s:%06i:%s' % (sequence_id, frame_index, k)


def load_masks_png(directory, seq):
    """
    Loads per-instance binary mask images named '<frame-stem>_<k>.png'.

    :param directory: The mask directory.
    :param seq: The FrameSequence the masks belong to.
    :return: A list of InstanceMask, ordered by (frame, k).
    """
    by_stem = dict((name, t) for t, name in enumerate(seq.names))
    found = []
    for path in list_numbered_files(directory, ('.png',)):
        stem = os.path.splitext(os.path.basename(path))[0]
        frame_stem, _, k = stem.rpartition('_')
        if frame_stem not in by_stem or not k.isdigit():
            _log.warning('Ignoring mask file %s: no frame %r in %s'
                         % (path, frame_stem, seq.sequence_id))
            continue
        t = by_stem[frame_stem]
        bitmap = to_gray(read_image(path)) > 0
        if bitmap.shape != seq.shape:
            raise DataError('Mask %s is %s, frames are %s'
                            % (path, bitmap.shape, seq.shape))
        if not bitmap.any():
            _log.warning('Ignoring empty mask %s' % path)
            continue
        found.append((t, int(k), InstanceMask.from_bitmap(
            t, bitmap, instance_id(seq.sequence_id, t, k))))
    found.sort(key=lambda x: (x[0], x[1]))
    return [m for _, _, m in found]


def load_masks_json(path, seq):
    """
    Loads run-length encoded masks from a JSON index.

    :return: A list of InstanceMask, ordered by (frame, instance id).
    """
    try:
        with open(path) as f:
            index = json.load(f)
    except (IOError, ValueError) as e:
        raise DataError('Cannot read mask index %s: %s' % (path, e))
    found = []
    for iid, frames in index.items():
        for t, runs in frames.items():
            t = int(t)
            if not 0 <= t < len(seq):
                raise DataError('Instance %s refers to frame %i of a %i frame '
                                'sequence' % (iid, t, len(seq)))
            rows, cols = [], []
            for row, col, length in runs:
                rows.extend([row] * length)
                cols.extend(range(col, col + length))
            try:
                mask = InstanceMask(t, rows, cols,
                                    instance_id(seq.sequence_id, t, iid),
                                    seq.shape)
            except StructuralError as e:
                raise DataError('Bad runs in %s: %s' % (path, e))
            found.append((t, str(iid), mask))
    found.sort(key=lambda x: (x[0], x[1]))
    return [m for _, _, m in found]


def load_masks(path, seq):
    if os.path.isdir(path):
        return load_masks_png(path, seq)
    return load_masks_json(path, seq)


"""
PER-FRAME COMPUTATIONS
"""


def median_background(seq, stride=DEF_MEDIAN_STRIDE):
    """
    The per-pixel temporal median over frames 0, stride, 2 stride, ... With
    an even number of frames the lower of the two middle values is used, so
    the result stays an 8-bit image.

    :return: A BackgroundModel.
    """
    if stride < 1:
        raise ParameterError('stride must be >= 1, got %r' % stride)
    used = seq.frames[::stride]
    if not used:
        raise StructuralError('No frames to build a background from')
    stack = np.sort(np.stack(used), axis=0)
    image = stack[(len(used) - 1) // 2].copy()
    return BackgroundModel(image, len(used), stride)


def lucas_kanade(prev, curr, window=DEF_LK_WINDOW):
    """
    Dense single-scale Lucas-Kanade flow of curr relative to prev. Spatial
    gradients are central differences averaged over both frames; every pixel
    solves the 2 x 2 least-squares system over its window x window
    neighbourhood (borders replicate). Pixels whose normal matrix has
    determinant below 1e-6 get zero flow.

    :return: A FlowField.
    """
    prev = np.asarray(prev, dtype=float)
    curr = np.asarray(curr, dtype=float)
    if prev.shape != curr.shape:
        raise StructuralError('Frames of shape %s and %s'
                              % (prev.shape, curr.shape))
    if window < 1 or window % 2 == 0:
        raise ParameterError('window must be an odd positive count')
    gy0, gx0 = np.gradient(prev)
    gy1, gx1 = np.gradient(curr)
    ix = 0.5 * (gx0 + gx1)
    iy = 0.5 * (gy0 + gy1)
    it = curr - prev

    area = float(window * window)

    def wsum(a):
        return ndimage.uniform_filter(a, size=window, mode='nearest') * area

    sxx = wsum(ix * ix)
    syy = wsum(iy * iy)
    sxy = wsum(ix * iy)
    bx = -wsum(ix * it)
    by = -wsum(iy * it)
    det = sxx * syy - sxy * sxy
    ok = det >= LK_DEGENERATE_DET
    safe = np.where(ok, det, 1.0)
    vx = np.where(ok, (syy * bx - sxy * by) / safe, 0.0)
    vy = np.where(ok, (sxx * by - sxy * bx) / safe, 0.0)
    statemon.state.increment('n_flow_fields')
    return FlowField(vx, vy)


def lbp_codes(img):
    """
    The uniform LBP bin (0..58) of every pixel; a neighbour sets its bit when
    it is strictly brighter than the center. Borders replicate.
    """
    img = np.asarray(img, dtype=float)
    padded = np.pad(img, LBP_RADIUS, mode='edge')
    h, w = img.shape
    code = np.zeros((h, w), dtype=np.int64)
    for bit, (dr, dc) in enumerate(_LBP_OFFSETS):
        nb = padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
        code |= (nb > img).astype(np.int64) << bit
    return _LBP_TABLE[code]


def _region(img, region):
    if region is None:
        return np.asarray(img).ravel()
    values = np.asarray(img)[region]
    if values.size == 0:
        raise StructuralError('Empty region')
    return values


def _normalized(counts):
    counts = np.asarray(counts, dtype=float)
    return counts / counts.sum()


def lbp_histogram(img, region=None):
    """
    The L1-normalized 59-bin uniform LBP histogram of img over region.

    :param img: A grayscale image.
    :param region: A (rows, cols) pixel index tuple, or None for every pixel.
    """
    codes = _region(lbp_codes(img), region)
    return _normalized(np.bincount(codes, minlength=LBP_BINS))


def intensity_histogram(img, region=None, bins=DEF_INTENSITY_BINS):
    """
    The L1-normalized histogram of img over region, with bins equal-width
    bins over [0, 255] (255 falls in the last bin).
    """
    if bins < 1:
        raise ParameterError('bins must be >= 1')
    values = _region(img, region)
    counts, _ = np.histogram(values, bins=bins, range=(0, 255))
    return _normalized(counts)


def flow_histogram(values, bins, flow_range):
    """
    The L1-normalized histogram of flow values over [-flow_range,
    flow_range]; values beyond the range land in the end bins.
    """
    v = np.clip(np.asarray(values, dtype=float), -flow_range, flow_range)
    if v.size == 0:
        raise StructuralError('Empty region')
    counts, _ = np.histogram(v, bins=bins, range=(-flow_range, flow_range))
    return _normalized(counts)


def flow_statistics(values):
    """
    :return: (min, max, mean, population std, mean absolute deviation about
             the mean, range)
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise StructuralError('flow_statistics needs at least one value')
    mean = v.mean()
    lo, hi = v.min(), v.max()
    return np.array([lo, hi, mean, v.std(), np.mean(np.abs(v - mean)),
                     hi - lo])


"""
NODE FEATURES
"""


def usable_masks(masks):
    """
    :return: The masks that have a predecessor frame, in input order.
    """
    kept = []
    for m in masks:
        if m.frame_index < 1:
            _log.warning('Skipping %s: it is on the first frame, so it has no '
                         'optical flow' % m.instance_id)
            statemon.state.increment('n_masks_skipped')
            continue
        kept.append(m)
    return kept


def instance_features(mask, curr, prev, bg, flow, layout):
    """
    The feature vector of one instance.
    """
    absdiff = np.abs(curr.astype(np.int16) - bg.astype(np.int16)).astype(
        np.uint8)
    P = mask.pixels
    r0, c0, r1, c1 = mask.bounding_box
    parts = []
    for field in (flow.vx, flow.vy):
        vals = field[P]
        parts.append(flow_histogram(vals, layout.of_hist_bins,
                                    layout.flow_range))
        parts.append(flow_statistics(vals))
    images = (curr, prev, bg, absdiff)
    for img in images:
        parts.append(intensity_histogram(img, P, layout.intensity_bins))
    for img in images:
        parts.append(lbp_histogram(img[r0:r1, c0:c1]))
    return np.concatenate(parts)


def _frame_features(seq, bg, t, masks, layout, window):
    curr = seq[t]
    prev = seq[t - 1]
    flow = lucas_kanade(prev, curr, window)
    return [instance_features(m, curr, prev, bg.image, flow, layout)
            for m in masks]


def build_node_features(seq, masks, bg, layout=None, window=DEF_LK_WINDOW,
                        num_threads=NUM_THREADS):
    """
    Computes the feature vector of every usable instance. Flow is computed
    once per frame; frames are processed concurrently, and the rows follow
    the input mask order.

    :param seq: The FrameSequence.
    :param masks: The InstanceMasks, any order.
    :param bg: The BackgroundModel of seq.
    :param layout: A FeatureLayout (default layout if None).
    :return: A FeatureMatrix; node ids are the instance ids. Masks on frame 0
             are skipped.
    """
    layout = layout or FeatureLayout()
    if bg.image.shape != seq.shape:
        raise StructuralError('Background is %s, frames are %s'
                              % (bg.image.shape, seq.shape))
    kept = usable_masks(masks)
    if len(kept) < 2:
        raise DataError('Sequence %s has %i usable instances, need at least 2'
                        % (seq.sequence_id, len(kept)))
    by_frame = {}
    for n, m in enumerate(kept):
        if m.frame_index >= len(seq):
            raise DataError('Instance %s is on frame %i of a %i frame sequence'
                            % (m.instance_id, m.frame_index, len(seq)))
        m.validate(seq.shape)
        by_frame.setdefault(m.frame_index, []).append(n)
    jobs = [(t, (seq, bg, t, [kept[n] for n in rows], layout, window))
            for t, rows in sorted(by_frame.items())]
    threads = 0 if MIN_THREADS else num_threads
    data = np.empty((len(kept), layout.total_dim))
    for t, vectors in workerpool.map_keyed(_frame_features, jobs, threads):
        for n, vec in zip(by_frame[t], vectors):
            data[n] = vec
    _log.info('%s: %i instance features of dimension %i (%i skipped)'
              % (seq.sequence_id, len(kept), layout.total_dim,
                 len(masks) - len(kept)))
    return FeatureMatrix(data, [m.instance_id for m in kept], layout.to_dict())


def stack_features(matrices):
    """
    Concatenates the feature matrices of several sequences.

    :raises StructuralError: if their layouts differ.
    """
    if not matrices:
        raise StructuralError('Nothing to stack')
    layout = matrices[0].layout
    for X in matrices[1:]:
        if X.layout != layout or X.m != matrices[0].m:
            raise StructuralError('Cannot stack features of different layouts')
    data = np.vstack([X.data for X in matrices])
    ids = [nid for X in matrices for nid in X.node_ids]
    return FeatureMatrix(data, ids, layout)
