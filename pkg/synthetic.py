"""
Generators of synthetic inputs: a small two-sequence video dataset with
oracle instance masks and ground truth (used by the end-to-end checks and the
`synth` subcommand), and random connected graphs and perturbations (used by
the verification suites and the tests).

The video dataset mimics the CDNet directory layout:

    <root>/<sequence>/input/in000001.png ...
    <root>/<sequence>/masks/in000002_0.png ...   (one file per instance)
    <root>/<sequence>/groundtruth/gt000002.png ...

Every frame holds a bright textured square moving over a smooth textured
static background (foreground), and a static textured patch that the masks
also report (background). The first frame has no ground truth, like the
warm-up frames outside a CDNet temporal region of interest.
"""

import json
import os
import numpy as np
from scipy import ndimage
from conf import *
from features import write_image
from graph_core import Graph

_log = logger.setup_logger(__name__)

FRAME_SIZE = 64
SQUARE = 12
STATIC_BOX = (44, 40)  # top left corner of the static instance
SEQUENCES = (
    # name, sweep axis, fixed coordinate, sweep range, speed
    ('synthA', 'horizontal', 10, (2, 50), 2),
    ('synthB', 'vertical', 10, (2, 30), 2),
)


def _sweep(t, lo, hi, speed):
    """
    Position at time t of a point bouncing between lo and hi.
    """
    span = hi - lo
    p = (t * speed) % (2 * span)
    return lo + (p if p <= span else 2 * span - p)


def _background(rng, size):
    noise = rng.uniform(0, 255, (size, size))
    smooth = ndimage.gaussian_filter(noise, sigma=3)
    smooth = (smooth - smooth.min()) / max(np.ptp(smooth), 1e-12)
    bg = 40 + 100 * smooth
    r, c = STATIC_BOX
    rr, cc = np.mgrid[0:SQUARE, 0:SQUARE]
    bg[r:r + SQUARE, c:c + SQUARE] = 60 + 30 * np.sin(rr / 2.0) * np.cos(cc / 2.5)
    return bg


def _square_texture():
    rr, cc = np.mgrid[0:SQUARE, 0:SQUARE]
    return 205 + 35 * np.sin(rr / 3.0) * np.cos(cc / 3.0)


def make_sequence(name, axis, fixed, sweep, speed, n_frames, seed):
    """
    Generates one synthetic sequence.

    :return: (frames, masks, gts) where frames is a list of uint8 images,
             masks a list over frames of [square bitmap, static bitmap], and
             gts a list over frames of CDNet-encoded images (None for the
             first frame).
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed,
                                                        stable_hash(name)]))
    bg = _background(rng, FRAME_SIZE)
    tex = _square_texture()
    r0, c0 = STATIC_BOX
    static = np.zeros((FRAME_SIZE, FRAME_SIZE), dtype=bool)
    static[r0:r0 + SQUARE, c0:c0 + SQUARE] = True
    frames, masks, gts = [], [], []
    for t in range(n_frames):
        pos = _sweep(t, sweep[0], sweep[1], speed)
        r, c = (fixed, pos) if axis == 'horizontal' else (pos, fixed)
        img = bg + rng.integers(-2, 3, bg.shape)
        img[r:r + SQUARE, c:c + SQUARE] = tex
        frames.append(np.clip(np.round(img), 0, 255).astype(np.uint8))
        square = np.zeros_like(static)
        square[r:r + SQUARE, c:c + SQUARE] = True
        masks.append([square, static])
        if t == 0:
            gts.append(None)
        else:
            gts.append(np.where(square, GT_MOVING, GT_STATIC).astype(np.uint8))
    return frames, masks, gts


def write_dataset(root, n_frames=30, seed=DEF_MASTER_SEED):
    """
    Writes the two-sequence dataset under root, plus a pipeline config
    (root/config.json) pointing at it with its workdir in root/work.

    :return: The path of the config file.
    """
    sequences = []
    for name, axis, fixed, sweep, speed in SEQUENCES:
        frames, masks, gts = make_sequence(name, axis, fixed, sweep, speed,
                                           n_frames, seed)
        base = os.path.join(root, name)
        for t, frame in enumerate(frames):
            stem = 'in%06i' % (t + 1)
            write_image(os.path.join(base, 'input', stem + '.png'), frame)
            for k, bitmap in enumerate(masks[t]):
                write_image(os.path.join(base, 'masks', '%s_%i.png' % (stem, k)),
                            np.where(bitmap, 255, 0))
            if gts[t] is not None:
                write_image(os.path.join(base, 'groundtruth',
                                         'gt%06i.png' % (t + 1)), gts[t])
        sequences.append({'name': name, 'category': 'synthetic',
                          'frames': os.path.join(base, 'input'),
                          'masks': os.path.join(base, 'masks'),
                          'gt': os.path.join(base, 'groundtruth')})
    config = {'sequences': sequences, 'workdir': os.path.join(root, 'work'),
              'master_seed': seed}
    path = os.path.join(root, CONFIG_FILE)
    with open(path, 'w') as f:
        json.dump(config, f, indent=2, sort_keys=True)
    _log.info('Wrote %i synthetic sequences of %i frames to %s'
              % (len(sequences), n_frames, root))
    return path


"""
RANDOM GRAPHS
"""


def random_connected_graph(n, rng, p_extra=0.3, w_range=(0.1, 1.0)):
    """
    A random connected weighted graph: a random spanning tree (every node
    i > 0 attaches to a random earlier node) plus every other pair with
    probability p_extra.

    :param n: The number of nodes, >= 2.
    :param rng: A numpy Generator.
    :return: A Graph.
    """
    if n < 2:
        raise ParameterError('Need at least 2 nodes')
    pairs = set()
    for i in range(1, n):
        pairs.add(pair_to_tuple(int(rng.integers(0, i)), i))
    iu, ju = np.triu_indices(n, 1)
    extra = rng.random(len(iu)) < p_extra
    for i, j in zip(iu[extra].tolist(), ju[extra].tolist()):
        pairs.add((i, j))
    pairs = sorted(pairs)
    rows = np.array([p[0] for p in pairs], dtype=np.int64)
    cols = np.array([p[1] for p in pairs], dtype=np.int64)
    w = rng.uniform(w_range[0], w_range[1], len(pairs))
    return Graph(n, rows, cols, w)


def random_spd(n, rng, min_eig=0.05, max_eig=2.0):
    """
    A random symmetric positive definite matrix with eigenvalues drawn from
    [min_eig, max_eig].
    """
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = rng.uniform(min_eig, max_eig, n)
    A = (Q * lam) @ Q.T
    return 0.5 * (A + A.T)


def random_sampling(n, m, rng):
    """
    m distinct node indices in random order.
    """
    return rng.permutation(n)[:m]
