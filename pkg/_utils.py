"""
GLOBAL UTILITY FUNCTIONS

Small helpers that are used all over the place. This imports _globals but not
conf, so that conf can import it without a cycle.
"""

import os
import re
import zlib
import numpy as np
import logger
from _globals import *

_log = logger.setup_logger(__name__)


"""
GENERAL
"""

_digits_re = re.compile(r'(\d+)')


def blocks(n, size):
    """
    Yields (start, stop) pairs covering range(n) in blocks of at most `size`.
    """
    for start in range(0, n, size):
        yield start, min(start + size, n)


def pair_to_tuple(i, j):
    """
    Converts a node pair into a sorted tuple, which is how every undirected
    edge is stored.

    :param i: A node index (ordering irrelevant)
    :param j: A node index (ordering irrelevant)
    :return: A sorted node tuple.
    """
    if i > j:
        return j, i
    return i, j


def canonical_edges(rows, cols):
    """
    Canonicalizes an array of (possibly directed, possibly repeated) node
    pairs into a sorted, deduplicated array of (i, j) with i < j.

    :param rows: Integer array of first endpoints.
    :param cols: Integer array of second endpoints.
    :return: Two integer arrays (i, j), lexicographically sorted.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    keep = lo != hi
    if not keep.any():
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    pairs = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)
    return pairs[:, 0].copy(), pairs[:, 1].copy()


def frozen(arr):
    """
    Returns a read-only view of arr; used for every array held by the
    immutable graph objects.
    """
    arr = np.asarray(arr)
    arr = arr.view()
    arr.flags.writeable = False
    return arr


"""
SEEDING
"""


def stable_hash(text):
    """
    A hash of a string that, unlike hash(), does not change between
    interpreter runs.
    """
    return zlib.crc32(text.encode('utf-8')) & 0xffffffff


def derive_seed(master_seed, *keys):
    """
    Derives an independent random stream for a job from the master seed and
    any number of keys (ints or strings), so that results never depend on the
    order in which jobs are run.

    :param master_seed: The master seed, a non-negative int.
    :param keys: The job key, e.g. (sequence, density index, trial).
    :return: A numpy Generator.
    """
    entropy = [int(master_seed)]
    for key in keys:
        if isinstance(key, str):
            entropy.append(stable_hash(key))
        else:
            entropy.append(int(key))
    return np.random.default_rng(np.random.SeedSequence(entropy))


"""
FILES
"""


def frame_number(path):
    """
    Returns the last run of digits in a file's stem, as an int, e.g.
    'in000123.png' -> 123. Returns None if there are no digits.
    """
    stem = os.path.splitext(os.path.basename(path))[0]
    found = _digits_re.findall(stem)
    if not found:
        return None
    return int(found[-1])


def list_numbered_files(directory, extensions):
    """
    Lists the files in a directory with one of the given extensions, ordered
    by filename (the CDNet convention zero-pads frame numbers, so name order
    is frame order).

    :param directory: The directory to scan.
    :param extensions: Iterable of lowercase extensions, with the dot.
    :return: A sorted list of full paths.
    """
    if not os.path.isdir(directory):
        raise DataError('Not a directory: %s' % directory)
    found = [os.path.join(directory, f) for f in sorted(os.listdir(directory))
             if os.path.splitext(f)[1].lower() in extensions]
    _log.debug('%i files found in %s' % (len(found), directory))
    return found


def ensure_dir(directory):
    if not os.path.isdir(directory):
        os.makedirs(directory)
    return directory
