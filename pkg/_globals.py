"""
This file contains globals that are not meant to be readily edited. It exists
for the same two reasons it always has:
    - conf imports utils, but utils requires parameters in conf
    - conf would otherwise become too large.
There are no hard-and-fast rules about what belongs in _globals vs. what
belongs in conf, except that nothing in here should change between runs.
"""

import os


"""
EXCEPTIONS
"""
# Exit codes, as returned by the command line tool.
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4


class GraphBGSError(Exception):
    """Base class for every error raised by graphbgs."""
    exit_code = EXIT_DATA


class UsageError(GraphBGSError):
    """Bad command line usage or an unusable configuration document."""
    exit_code = EXIT_USAGE


class StructuralError(GraphBGSError, ValueError):
    """Inputs have mismatched shapes or violate a structural invariant."""
    exit_code = EXIT_DATA


class ParameterError(GraphBGSError, ValueError):
    """A parameter is outside of its admissible range."""
    exit_code = EXIT_USAGE


class DataError(GraphBGSError):
    """Input files are missing, unreadable or malformed."""
    exit_code = EXIT_DATA


class DegenerateInputError(GraphBGSError, ValueError):
    """The input data makes the requested quantity undefined."""
    exit_code = EXIT_DATA


class NumericalError(GraphBGSError):
    """A numerical procedure failed."""
    exit_code = EXIT_NUMERICAL


class CapabilityError(NumericalError):
    """The problem is too large for the requested (dense) code path."""


class ConvergenceError(NumericalError):
    """An iterative solver did not reach its tolerance."""
    def __init__(self, message, residual=None, iterations=None):
        super(ConvergenceError, self).__init__(message)
        self.residual = residual
        self.iterations = iterations


class RecoveryError(NumericalError):
    """A sampling set does not allow the requested reconstruction."""


class VerificationError(GraphBGSError):
    """A theorem or invariant check failed."""
    exit_code = EXIT_VERIFICATION


"""
FILE FORMATS
"""
FEATURE_MAGIC = b'GBGSFEAT'
FEATURE_FORMAT_VERSION = 1
# header: magic, version (u32), N (u64), M (u64). little endian throughout.
FEATURE_HEADER_FMT = '<8sIQQ'
GRAPH_HEADER_PREFIX = '# nodes='
FLOAT_STR = '%.17g'  # round-trips a float64 exactly


"""
CLASSES
"""
BACKGROUND = 0
FOREGROUND = 1
NUM_CLASSES = 2
UNLABELED = -1


"""
CDNET GROUND TRUTH ENCODING
"""
GT_STATIC = 0
GT_SHADOW = 50
GT_OUTSIDE_ROI = 85
GT_UNKNOWN = 170
GT_MOVING = 255
GT_EXCLUDED_VALUES = (GT_OUTSIDE_ROI, GT_UNKNOWN)


"""
LOCAL BINARY PATTERNS
"""
# uniform patterns, 8 neighbours: 58 uniform codes plus one catch-all bin.
LBP_NEIGHBOURS = 8
LBP_RADIUS = 1
LBP_BINS = 59
LBP_VARIANT = 'uniform-P8R1'
FLOW_STAT_COUNT = 6  # min, max, mean, std, mean absolute deviation, range


"""
DIRECTORIES
"""
ROOT = os.path.dirname(os.path.abspath(__file__))
TEMPLATE_DIR = os.path.join(ROOT, 'static', 'templates')
CURVE_TEMPLATE = 'density_curve.svg'
WORKDIR_ENV = 'GRAPHBGS_WORKDIR'


"""
WORKDIR FILE NAMES
"""
FEATURES_FILE = 'features.gbf'
GRAPH_FILE = 'graph.txt'
GRAPH_REPORT_FILE = 'graph_report.json'
DECISIONS_FILE = 'decisions.csv'
RESULTS_FILE = 'results.csv'
SUMMARY_FILE = 'summary.csv'
CURVE_FILE = 'density_curve.svg'
CONFIG_FILE = 'config.json'


"""
NUMERICAL CONSTANTS
"""
EIGENVALUE_TOL = 1e-8  # eigenvalues within this of each other are a cluster
RANK_TOL = 1e-10  # singular values below this (relative) are treated as zero
LK_DEGENERATE_DET = 1e-6
