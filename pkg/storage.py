"""
Reads and writes every file graphbgs exchanges between pipeline stages.

Feature files (binary, little endian):
    header      magic 'GBGSFEAT', version u32, N u64, M u64
    data        N*M float64, row-major
    node ids    N times (u32 byte length, UTF-8 bytes)
    layout      u32 byte length, UTF-8 JSON (length 0 when there is none)

Feature CSV (import only): one row per node, first column the node id, the
remaining columns the features. A header row is allowed if its second field is
not a number.

Graph files (text):
    # nodes=N
    i j w
    ...

Sampling sets (CSV): a '# seed=..., density=..., n_nodes=...' comment line,
then an 'index' header and the sorted node indices.

Label files (CSV): node_id,class,sampled with class in {0, 1} (empty when
unknown) and sampled in {0, 1}.
"""

import csv
import json
import os
import struct
import numpy as np
from conf import *
from graph_core import FeatureMatrix, Graph

_log = logger.setup_logger(__name__)


"""
FEATURE FILES
"""


def write_features(path, X):
    """
    Writes a FeatureMatrix to the binary feature container.

    :param path: The destination file.
    :param X: A FeatureMatrix. Its layout (a dict) is embedded, if any.
    """
    with open(path, 'wb') as f:
        f.write(struct.pack(FEATURE_HEADER_FMT, FEATURE_MAGIC,
                            FEATURE_FORMAT_VERSION, X.n, X.m))
        f.write(np.ascontiguousarray(X.data, dtype='<f8').tobytes())
        for nid in X.node_ids:
            raw = nid.encode('utf-8')
            f.write(struct.pack('<I', len(raw)))
            f.write(raw)
        layout = b''
        if X.layout is not None:
            layout = json.dumps(X.layout, sort_keys=True).encode('utf-8')
        f.write(struct.pack('<I', len(layout)))
        f.write(layout)
    _log.info('Wrote %i x %i features to %s' % (X.n, X.m, path))


def _number(conv, text, path, lineno):
    """
    Converts one field of a text file, reporting the file and line on failure.
    """
    try:
        return conv(text)
    except ValueError:
        raise DataError('Bad number %r on line %i of %s'
                        % (text, lineno, path))


def _unreadable(path, e):
    return DataError('Cannot read %s: %s' % (path, e))


def _read_exact(f, n, what):
    raw = f.read(n)
    if len(raw) != n:
        raise DataError('Truncated feature file while reading %s' % what)
    return raw


def _read_feature_container(path):
    hsize = struct.calcsize(FEATURE_HEADER_FMT)
    with open(path, 'rb') as f:
        magic, version, n, m = struct.unpack(
            FEATURE_HEADER_FMT, _read_exact(f, hsize, 'header'))
        if magic != FEATURE_MAGIC:
            raise DataError('%s is not a feature file (magic %r)'
                            % (path, magic))
        if version != FEATURE_FORMAT_VERSION:
            raise DataError('Unsupported feature file version %i' % version)
        data = np.frombuffer(_read_exact(f, 8 * n * m, 'data'), dtype='<f8')
        data = data.reshape(n, m).astype(np.float64)
        ids = []
        for _ in range(n):
            (ln,) = struct.unpack('<I', _read_exact(f, 4, 'node id length'))
            ids.append(_read_exact(f, ln, 'node id').decode('utf-8'))
        layout = None
        tail = f.read(4)
        if len(tail) == 4:
            (ln,) = struct.unpack('<I', tail)
            if ln:
                layout = json.loads(_read_exact(f, ln, 'layout').decode(
                    'utf-8'))
    return data, ids, layout


def read_features(path):
    """
    Reads a binary feature container.

    :return: A FeatureMatrix.
    :raises DataError: on a bad magic, unknown version, truncation, or
                       undecodable ids or layout.
    """
    if not os.path.isfile(path):
        raise DataError('No feature file at %s' % path)
    try:
        data, ids, layout = _read_feature_container(path)
    except (OSError, ValueError) as e:
        raise _unreadable(path, e)
    m = data.shape[1]
    if layout is not None and not isinstance(layout, dict):
        raise DataError('Layout of %s is not a JSON object' % path)
    if layout is not None and layout.get('total_dim', m) != m:
        raise DataError('Layout says %r dimensions but the file has %i'
                        % (layout.get('total_dim'), m))
    return FeatureMatrix(data, ids, layout)


def read_features_csv(path):
    """
    Imports features from a CSV file, one row per node, node id first.

    :return: A FeatureMatrix without a layout.
    """
    ids, rows = [], []
    try:
        with open(path) as f:
            for n, rec in enumerate(csv.reader(f)):
                if not rec:
                    continue
                if n == 0 and len(rec) > 1:
                    try:
                        float(rec[1])
                    except ValueError:
                        continue  # header
                ids.append(rec[0])
                rows.append([_number(float, x, path, n + 1)
                             for x in rec[1:]])
    except (OSError, UnicodeDecodeError) as e:
        raise _unreadable(path, e)
    if not rows:
        raise DataError('No feature rows in %s' % path)
    if len(set(len(r) for r in rows)) > 1:
        raise DataError('Rows of %s have different lengths' % path)
    return FeatureMatrix(np.array(rows), ids)


def load_features(path):
    """
    Reads features from either format, by extension.
    """
    if path.lower().endswith('.csv'):
        return read_features_csv(path)
    return read_features(path)


"""
GRAPH FILES
"""


def write_graph(path, G):
    with open(path, 'w') as f:
        f.write('%s%i\n' % (GRAPH_HEADER_PREFIX, G.n_nodes))
        for i, j, w in zip(G.rows.tolist(), G.cols.tolist(),
                           G.weights.tolist()):
            f.write('%i %i %s\n' % (i, j, FLOAT_STR % w))
    _log.info('Wrote graph with %i nodes and %i edges to %s'
              % (G.n_nodes, G.n_edges, path))


def read_graph(path):
    """
    Reads an edge list. Edges may be given in either orientation; they are
    canonicalized to i < j. A repeated pair is a data error.

    :return: A Graph.
    """
    if not os.path.isfile(path):
        raise DataError('No graph file at %s' % path)
    n_nodes = None
    rows, cols, ws = [], [], []
    try:
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith(GRAPH_HEADER_PREFIX):
                    n_nodes = _number(int, line[len(GRAPH_HEADER_PREFIX):],
                                      path, lineno)
                    continue
                if line.startswith('#'):
                    continue
                parts = line.split()
                if len(parts) != 3:
                    raise DataError('Line %i of %s is not "i j w"'
                                    % (lineno, path))
                i, j = pair_to_tuple(_number(int, parts[0], path, lineno),
                                     _number(int, parts[1], path, lineno))
                rows.append(i)
                cols.append(j)
                ws.append(_number(float, parts[2], path, lineno))
    except (OSError, UnicodeDecodeError) as e:
        raise _unreadable(path, e)
    if n_nodes is None:
        raise DataError('Graph file %s has no "%s" header'
                        % (path, GRAPH_HEADER_PREFIX))
    rows = np.array(rows, dtype=np.int64)
    cols = np.array(cols, dtype=np.int64)
    ws = np.array(ws, dtype=float)
    order = np.lexsort((cols, rows))
    try:
        return Graph(n_nodes, rows[order], cols[order], ws[order])
    except StructuralError as e:
        raise DataError('Invalid graph in %s: %s' % (path, e))


"""
SAMPLING SETS
"""


def write_sampling_set(path, S, seed=None, density=None):
    with open(path, 'w') as f:
        f.write('# seed=%s, density=%s, n_nodes=%i\n'
                % (seed, density, S.n_nodes))
        f.write('index\n')
        for i in sorted(S.indices.tolist()):
            f.write('%i\n' % i)


def read_sampling_set(path):
    """
    :return: (indices, metadata dict). n_nodes in the metadata is an int.
    """
    meta = {}
    indices = []
    try:
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line or line == 'index':
                    continue
                if line.startswith('#'):
                    for item in line[1:].split(','):
                        if '=' in item:
                            k, v = item.split('=', 1)
                            meta[k.strip()] = v.strip()
                    continue
                indices.append(_number(int, line, path, lineno))
    except (OSError, UnicodeDecodeError) as e:
        raise _unreadable(path, e)
    if 'n_nodes' in meta:
        meta['n_nodes'] = _number(int, meta['n_nodes'], path, 1)
    return np.array(indices, dtype=np.int64), meta


"""
LABELS AND DECISIONS
"""


def read_labels(path):
    """
    Reads a labels CSV (node_id, class, sampled).

    :return: A list of (node_id, class or None, sampled bool) in file order.
    """
    out = []
    try:
        with open(path) as f:
            for n, rec in enumerate(csv.reader(f)):
                if not rec:
                    continue
                if n == 0 and rec[0].strip().lower() == 'node_id':
                    continue
                if len(rec) < 3:
                    raise DataError('Line %i of %s needs node_id,class,'
                                    'sampled' % (n + 1, path))
                cls = rec[1].strip()
                cls = _number(int, cls, path, n + 1) if cls else None
                out.append((rec[0].strip(), cls,
                            rec[2].strip() in ('1', 'true', 'True')))
    except (OSError, UnicodeDecodeError) as e:
        raise _unreadable(path, e)
    return out


def write_labels(path, node_ids, classes, sampled):
    with open(path, 'w') as f:
        w = csv.writer(f, lineterminator='\n')
        w.writerow(['node_id', 'class', 'sampled'])
        for nid, c, s in zip(node_ids, classes, sampled):
            w.writerow([nid, '' if c is None or c < 0 else int(c),
                        int(bool(s))])


def write_decisions(path, node_ids, Z, classes):
    """
    Writes the recovered signal and the class decision of every node.
    """
    with open(path, 'w') as f:
        w = csv.writer(f, lineterminator='\n')
        w.writerow(['node_id'] + ['z_%i' % q for q in range(Z.shape[1])] +
                   ['class'])
        for nid, z, c in zip(node_ids, Z, classes):
            w.writerow([nid] + [FLOAT_STR % v for v in z] + [int(c)])


def write_vector(path, node_ids, values, name='value'):
    with open(path, 'w') as f:
        w = csv.writer(f, lineterminator='\n')
        w.writerow(['node_id', name])
        for nid, v in zip(node_ids, values):
            w.writerow([nid, FLOAT_STR % v])


def read_vector(path):
    """
    Reads a two-column (node_id, value) CSV.

    :return: (list of node ids, float array)
    """
    ids, vals = [], []
    try:
        with open(path) as f:
            for n, rec in enumerate(csv.reader(f)):
                if not rec:
                    continue
                try:
                    vals.append(float(rec[1]))
                except (ValueError, IndexError):
                    if n == 0:
                        continue
                    raise DataError('Bad value on line %i of %s'
                                    % (n + 1, path))
                ids.append(rec[0])
    except (OSError, UnicodeDecodeError) as e:
        raise _unreadable(path, e)
    return ids, np.array(vals)
