"""
Global configuration parameters for graphbgs.

Configuration is spread out among:
    conf.py     <--- configurable params
    _globals.py <--- global parameters, shouldn't need changing too often
    _utils.py   <--- utility functions that are widely used.

Anything in here can be overridden per run through the JSON pipeline config
(see pipeline_config.py) or through command line flags.
"""

from _globals import *  # i know this is redundant but it keeps imports short.
from _utils import *

"""
For debugging
"""
MIN_THREADS = False  # if True, everything runs in the calling thread.
NUM_THREADS = 4  # the number of worker threads for trials and feature jobs.


"""
GRAPH CONSTRUCTION
"""
DEF_K = 30  # the number of nearest neighbours per node
# what to do when the k-NN graph is disconnected: 'connect' adds the shortest
# cross-component edge per extra component, 'error' refuses the graph.
DISCONNECTED_POLICY = 'connect'
# how |E| is counted in the kernel bandwidth estimate: 'undirected' counts each
# pair once, 'directed' counts both orientations.
SIGMA_EDGE_COUNTING = 'undirected'
KNN_CHUNK_SIZE = 1024  # query rows per block of the brute-force distance matrix


"""
SPECTRAL / DENSE LIMITS
"""
DENSE_EIG_LIMIT = 5000  # largest N for a dense eigendecomposition
CLOSED_FORM_LIMIT = 5000  # largest N for which method 'auto' picks closed form


"""
SOBOLEV SOLVER
"""
DEF_EPSILON = 0.2
DEF_BETA = 1
DEF_METHOD = 'auto'  # one of 'closed', 'iterative', 'auto'
DEF_WEIGHTING = 'none'  # 'none' solves zT(L+eI)^b z, 'degree' the D-weighted form
DEF_CG_TOL = 1e-10  # relative residual of every inner SPD solve
DEF_CG_MAX_ITER = 10000
SOLVER_AGREEMENT_TOL = 1e-6  # closed form vs. iterative contract
INTERPOLATION_TOL = 1e-6


"""
SAMPLING / RECOVERY
"""
DEF_ETA = 0.2
DEF_G_COEFFS = (0.0, 1.0)  # g(x) = x, i.e. g(L) = L


"""
FEATURE EXTRACTION
"""
DEF_OF_HIST_BINS = 64
DEF_INTENSITY_BINS = 32
DEF_FLOW_RANGE = 8.0  # flow histograms cover [-range, range] pixels / frame
DEF_LK_WINDOW = 5
DEF_MEDIAN_STRIDE = 1
FRAME_EXTENSIONS = ('.png', '.pgm', '.jpg', '.jpeg', '.bmp')


"""
LABELING RULE
"""
T_MU_STRONG = 0.25  # mu alone makes a node foreground
T_XI_MID = 0.45  # ... or xi above this together with mu above T_MU_MID
T_MU_MID = 0.05
T_XI_HIGH = 0.9  # ... or xi above this together with mu above T_MU_LOW
T_MU_LOW = 0.02


"""
EXPERIMENT
"""
DEF_DENSITIES = (0.001, 0.005, 0.01, 0.02, 0.04, 0.06, 0.08, 0.10)
DEF_TRIALS_PER_DENSITY = 5
DEF_MASTER_SEED = 0


"""
VERIFICATION SUITES
"""
VERIFY_RECOVERY_INSTANCES = 100
VERIFY_RECOVERY_MAX_N = 30
VERIFY_PERTURB_INSTANCES = 200
VERIFY_PERTURB_MAX_N = 20
VERIFY_SOLVER_INSTANCES = 20
VERIFY_SOLVER_MAX_N = 50
VERIFY_OPTIMALITY_MAX_N = 30
VERIFY_RANDOM_INTERPOLANTS = 100
VERIFY_LEMMA_SAMPLES = 10000
