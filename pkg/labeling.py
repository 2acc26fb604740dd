"""
Turns ground-truth annotation images into node labels, and measures pixel
level precision / recall / F-measure of the node decisions.

Ground truth uses the CDNet encoding:
    255         foreground (moving)
    0, 50       background (static, hard shadow)
    85, 170     outside the region of interest / unknown: excluded from both
                labeling and the confusion counts
Foreground regions are the 8-connected components of the 255 pixels.

An instance with pixel set P_v (minus excluded pixels) is foreground when

    mu > 0.25,  or  xi > 0.45 and mu > 0.05,  or  xi > 0.9 and mu > 0.02

where xi = |P_v & GT| / |P_v| and mu is the best intersection over union of
P_v with any single region; it is background otherwise, and always when there
is no region or xi = 0 or mu = 0.
"""

import collections
import numpy as np
from scipy import ndimage
from conf import *
from features import read_image, to_gray
from sobolev import LabelMatrix
import statemon

_log = logger.setup_logger(__name__)

statemon.define('n_unlabeled_nodes', int)

_EIGHT = np.ones((3, 3), dtype=int)

Metrics = collections.namedtuple('Metrics', ['precision', 'recall',
                                             'f_measure'])

NodeLabelDecision = collections.namedtuple('NodeLabelDecision',
                                           ['xi', 'mu', 'label'])


class ThresholdRule(object):
    """
    The three foreground branches of the labeling rule.
    """
    def __init__(self, t_mu_strong=T_MU_STRONG, t_xi_mid=T_XI_MID,
                 t_mu_mid=T_MU_MID, t_xi_high=T_XI_HIGH, t_mu_low=T_MU_LOW):
        vals = (t_mu_strong, t_xi_mid, t_mu_mid, t_xi_high, t_mu_low)
        if not all(0 <= v <= 1 for v in vals):
            raise ParameterError('Thresholds must be in [0, 1], got %r'
                                 % (vals,))
        self.t_mu_strong = t_mu_strong
        self.t_xi_mid = t_xi_mid
        self.t_mu_mid = t_mu_mid
        self.t_xi_high = t_xi_high
        self.t_mu_low = t_mu_low


class GroundTruthFrame(object):
    """
    The annotation of one frame: foreground pixels, their 8-connected
    regions, and the excluded pixels.
    """
    def __init__(self, frame_index, image):
        """
        :param frame_index: The 0-based index of the frame in its sequence.
        :param image: The H x W CDNet-encoded annotation.
        """
        image = np.asarray(image)
        if image.ndim != 2:
            raise StructuralError('Ground truth must be a 2-D image')
        self.frame_index = int(frame_index)
        self.fg = frozen(image == GT_MOVING)
        self.excluded = frozen(np.isin(image, GT_EXCLUDED_VALUES))
        labels, n = ndimage.label(self.fg, structure=_EIGHT)
        self.region_labels = frozen(labels)
        self.n_regions = int(n)
        self.region_sizes = frozen(np.bincount(labels.ravel(),
                                               minlength=n + 1))

    @property
    def shape(self):
        return self.fg.shape

    def regions(self):
        """
        :return: One (rows, cols) pixel index tuple per region.
        """
        return [np.nonzero(self.region_labels == r)
                for r in range(1, self.n_regions + 1)]


def load_ground_truth(directory, seq):
    """
    Loads the CDNet annotation images of a sequence. The digits of each file
    stem are matched against the digits of the frame names, so gt000012.png
    annotates in000012.png whatever its position.

    :param directory: The groundtruth directory.
    :param seq: The FrameSequence.
    :return: A dict frame index -> GroundTruthFrame.
    """
    by_number = {}
    for t, name in enumerate(seq.names):
        num = frame_number(name)
        if num is not None:
            by_number[num] = t
    out = {}
    for path in list_numbered_files(directory, FRAME_EXTENSIONS):
        num = frame_number(path)
        if num not in by_number:
            _log.debug('No frame for ground truth %s' % path)
            continue
        image = to_gray(read_image(path))
        if image.shape != seq.shape:
            raise DataError('Ground truth %s is %s, frames are %s'
                            % (path, image.shape, seq.shape))
        out[by_number[num]] = GroundTruthFrame(by_number[num], image)
    _log.info('%s: ground truth for %i of %i frames'
              % (seq.sequence_id, len(out), len(seq)))
    return out


def _flat(pixels, shape=None):
    """
    Normalizes a pixel set (a python set of ints, an array of flat indices,
    or a (rows, cols) tuple with a shape) to sorted unique flat indices.
    """
    if isinstance(pixels, (set, frozenset)):
        return np.array(sorted(pixels), dtype=np.int64)
    if isinstance(pixels, tuple) and len(pixels) == 2 and shape is not None:
        return np.unique(np.ravel_multi_index(pixels, shape))
    return np.unique(np.asarray(pixels, dtype=np.int64))


def intersection_over_node(P_v, GT):
    """
    xi = |P_v & GT| / |P_v|.

    :param P_v: The instance pixel set (set or flat index array).
    :param GT: The foreground pixel set.
    """
    pv = _flat(P_v)
    if not len(pv):
        raise StructuralError('Empty instance pixel set')
    return float(len(np.intersect1d(pv, _flat(GT), assume_unique=True))) / \
        len(pv)


def region_iou(P_v, gt_regions):
    """
    :return: The intersection over union of P_v with every region, as a
             vector (empty when there are no regions). mu is its max, or 0.
    """
    pv = _flat(P_v)
    out = np.zeros(len(gt_regions))
    for n, region in enumerate(gt_regions):
        r = _flat(region)
        inter = len(np.intersect1d(pv, r, assume_unique=True))
        union = len(pv) + len(r) - inter
        out[n] = float(inter) / union if union else 0.0
    return out


def best_iou(u):
    return float(np.max(u)) if len(u) else 0.0


def decide_label(xi, mu, regions_empty, rule=None):
    """
    :return: FOREGROUND or BACKGROUND.
    """
    rule = rule or DEFAULT_RULE
    if regions_empty or mu == 0 or xi == 0:
        return BACKGROUND
    if mu > rule.t_mu_strong:
        return FOREGROUND
    if xi > rule.t_xi_mid and mu > rule.t_mu_mid:
        return FOREGROUND
    if xi > rule.t_xi_high and mu > rule.t_mu_low:
        return FOREGROUND
    return BACKGROUND


DEFAULT_RULE = ThresholdRule()


def label_instance(mask, gt, rule=None):
    """
    Labels one instance against the annotation of its frame, ignoring the
    excluded pixels.

    :return: A NodeLabelDecision, or None when every pixel is excluded.
    """
    rows, cols = mask.pixels
    if rows.max() >= gt.shape[0] or cols.max() >= gt.shape[1]:
        raise StructuralError('Instance %s does not fit the %s ground truth'
                              % (mask.instance_id, gt.shape))
    keep = ~gt.excluded[rows, cols]
    if not keep.any():
        return None
    rows, cols = rows[keep], cols[keep]
    size = len(rows)
    hit = gt.region_labels[rows, cols]
    inter = np.bincount(hit, minlength=gt.n_regions + 1)[1:]
    xi = float(inter.sum()) / size
    if gt.n_regions:
        union = size + gt.region_sizes[1:] - inter
        mu = float(np.max(inter / union.astype(float)))
    else:
        mu = 0.0
    return NodeLabelDecision(xi, mu, decide_label(xi, mu, gt.n_regions == 0,
                                                  rule))


def label_nodes(masks, gts, rule=None):
    """
    Labels every instance whose frame is annotated.

    :param masks: InstanceMasks, in node order.
    :param gts: A dict frame index -> GroundTruthFrame.
    :return: (classes, decisions): the class of every node, UNLABELED where
             there is no annotation, and the NodeLabelDecision (or None).
    """
    classes = np.full(len(masks), UNLABELED, dtype=np.int64)
    decisions = []
    for n, m in enumerate(masks):
        gt = gts.get(m.frame_index)
        d = label_instance(m, gt, rule) if gt is not None else None
        decisions.append(d)
        if d is not None:
            classes[n] = d.label
    n_unlabeled = int(np.sum(classes == UNLABELED))
    if n_unlabeled:
        statemon.state.increment('n_unlabeled_nodes', n_unlabeled)
    return classes, decisions


def build_graph_signal(masks, gts, rule=None):
    """
    The one-hot graph signal of the instances: background [1, 0],
    foreground [0, 1], and an all-zero row for unlabeled nodes, which are
    left out of the sampled set.

    :return: A LabelMatrix whose sampled set is every labeled node.
    :raises DataError: if no node can be labeled.
    """
    classes, _ = label_nodes(masks, gts, rule)
    labeled = np.flatnonzero(classes != UNLABELED)
    if not len(labeled):
        raise DataError('No instance has ground truth')
    return LabelMatrix.from_classes(classes, labeled)


"""
METRICS
"""


def frame_confusion(gt, masks, classes):
    """
    The (tp, fp, fn) pixel counts of one annotated frame, where the
    prediction is the union of the instances classified foreground.
    """
    pred = np.zeros(gt.shape, dtype=bool)
    for m, c in zip(masks, classes):
        if c == FOREGROUND:
            rows, cols = m.pixels
            if rows.max() >= gt.shape[0] or cols.max() >= gt.shape[1]:
                raise StructuralError('Instance %s does not fit the %s ground '
                                      'truth' % (m.instance_id, gt.shape))
            pred[rows, cols] = True
    valid = ~gt.excluded
    tp = int(np.sum(pred & gt.fg & valid))
    fp = int(np.sum(pred & ~gt.fg & valid))
    fn = int(np.sum(~pred & gt.fg & valid))
    return tp, fp, fn


def frame_confusions(masks, classes, gts):
    """
    :return: A dict frame index -> (tp, fp, fn) over every annotated frame,
             including frames where no instance was detected.
    """
    by_frame = collections.defaultdict(list)
    for m, c in zip(masks, classes):
        by_frame[m.frame_index].append((m, c))
    out = {}
    for t in sorted(gts):
        pairs = by_frame.get(t, [])
        out[t] = frame_confusion(gts[t], [p[0] for p in pairs],
                                 [p[1] for p in pairs])
    return out


def pixel_confusion(masks, classes, gts):
    """
    :return: The (tp, fp, fn) totals over every annotated frame.
    """
    per_frame = frame_confusions(masks, classes, gts)
    if not per_frame:
        return 0, 0, 0
    tp, fp, fn = np.sum(np.array(list(per_frame.values()), dtype=np.int64),
                        axis=0)
    return int(tp), int(fp), int(fn)


def f_measure(tp, fp, fn):
    """
    Precision TP / (TP + FP), recall TP / (TP + FN) and their harmonic mean.
    A ratio with a zero denominator is 1 when the other error count is also
    zero (nothing predicted and nothing to find), and 0 otherwise. F is 0
    when P + R = 0.

    :return: A Metrics tuple.
    """
    if min(tp, fp, fn) < 0:
        raise ParameterError('Counts must be nonnegative')
    if tp + fp:
        p = float(tp) / (tp + fp)
    else:
        p = 1.0 if fn == 0 else 0.0
    if tp + fn:
        r = float(tp) / (tp + fn)
    else:
        r = 1.0 if fp == 0 else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return Metrics(p, r, f)


class EvalReport(object):
    """
    Pixel counts and metrics of one evaluation scope (a trial on one
    sequence, or an aggregate), with the trial metadata.
    """
    FIELDS = ('sequence', 'density', 'trial', 'seed', 'n_sampled', 'tp', 'fp',
              'fn', 'precision', 'recall', 'f_measure')

    def __init__(self, tp, fp, fn, sequence=None, density=None, trial=None,
                 seed=None, n_sampled=None):
        self.tp, self.fp, self.fn = int(tp), int(fp), int(fn)
        self.precision, self.recall, self.f_measure = f_measure(tp, fp, fn)
        self.sequence = sequence
        self.density = density
        self.trial = trial
        self.seed = seed
        self.n_sampled = n_sampled

    def as_row(self):
        return [getattr(self, f) for f in self.FIELDS]

    @classmethod
    def aggregate(cls, reports, **meta):
        """
        Sums the counts of several reports.
        """
        tp = sum(r.tp for r in reports)
        fp = sum(r.fp for r in reports)
        fn = sum(r.fn for r in reports)
        return cls(tp, fp, fn, **meta)

