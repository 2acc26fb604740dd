"""
The JSON document that drives the command line tool: where the sequences are,
where the outputs go, and every parameter of every stage.

    {
      "sequences": [{"name": ..., "frames": ..., "masks": ..., "gt": ...,
                     "category": ...}, ...],
      "workdir": ...,
      "layout": {...}, "k": 30, "epsilon": 0.2, "beta": 1, ...
      "plan": {"densities": [...], "trials_per_density": 5},
      "master_seed": 0
    }

Relative paths are resolved against the directory of the config file. Missing
keys take the defaults of conf.py. Command line flags override the file, and
the GRAPHBGS_WORKDIR environment variable overrides the workdir (and nothing
else).
"""

import json
import os
from conf import *
from experiment import ExperimentPlan
from features import FeatureLayout
import sobolev

_log = logger.setup_logger(__name__)

_SEQUENCE_KEYS = ('name', 'frames', 'masks', 'gt', 'category')
_SCALARS = (
    # key, default, type
    ('k', DEF_K, int),
    ('epsilon', DEF_EPSILON, float),
    ('beta', DEF_BETA, float),
    ('weighting', DEF_WEIGHTING, str),
    ('method', DEF_METHOD, str),
    ('tol', DEF_CG_TOL, float),
    ('max_iter', DEF_CG_MAX_ITER, int),
    ('master_seed', DEF_MASTER_SEED, int),
    ('policy', DISCONNECTED_POLICY, str),
    ('counting', SIGMA_EDGE_COUNTING, str),
    ('num_threads', NUM_THREADS, int),
    ('lk_window', DEF_LK_WINDOW, int),
    ('median_stride', DEF_MEDIAN_STRIDE, int),
)


class PipelineConfig(object):
    """
    The parsed pipeline config. Attributes carry the names of the JSON keys.
    """
    def __init__(self, sequences=(), workdir='.', layout=None, plan=None,
                 base_dir=None, **params):
        unknown = set(params) - set(k for k, _, _ in _SCALARS)
        if unknown:
            raise UsageError('Unknown config keys: %s'
                             % ', '.join(sorted(unknown)))
        self.sequences = [self._sequence(s) for s in sequences]
        names = [s['name'] for s in self.sequences]
        if len(set(names)) != len(names):
            raise UsageError('Sequence names must be unique, got %s' % names)
        self.workdir = workdir
        try:
            self.layout = layout if isinstance(layout, FeatureLayout) else \
                FeatureLayout.from_dict(layout)
        except TypeError as e:
            raise UsageError('Bad feature layout: %s' % e)
        self.plan = plan if isinstance(plan, ExperimentPlan) else \
            ExperimentPlan.from_dict(plan)
        self.base_dir = base_dir or os.getcwd()
        for key, default, typ in _SCALARS:
            value = params.get(key, default)
            try:
                value = typ(value)
            except (TypeError, ValueError):
                raise UsageError('Config key %s must be a %s, got %r'
                                 % (key, typ.__name__, value))
            setattr(self, key, value)
        if self.beta == int(self.beta):
            self.beta = int(self.beta)
        if self.method not in sobolev.METHODS:
            raise UsageError('method must be one of %s, got %r'
                             % (sobolev.METHODS, self.method))
        if self.policy not in ('connect', 'error'):
            raise UsageError("policy must be 'connect' or 'error', got %r"
                             % self.policy)
        if self.counting not in ('undirected', 'directed'):
            raise UsageError("counting must be 'undirected' or 'directed', "
                             "got %r" % self.counting)

    @staticmethod
    def _sequence(s):
        if not isinstance(s, dict) or 'name' not in s or 'frames' not in s \
                or 'masks' not in s:
            raise UsageError('Every sequence needs at least name, frames and '
                             'masks, got %r' % (s,))
        unknown = set(s) - set(_SEQUENCE_KEYS)
        if unknown:
            raise UsageError('Unknown sequence keys: %s'
                             % ', '.join(sorted(unknown)))
        return dict((k, s.get(k)) for k in _SEQUENCE_KEYS)

    def params(self):
        """
        :return: The SobolevParams of this config.
        """
        return sobolev.SobolevParams(self.epsilon, self.beta, self.weighting)

    def resolve(self, path):
        """
        Resolves a path of the document against the config directory.
        """
        if path is None:
            return None
        path = os.path.expanduser(path)
        if os.path.isabs(path):
            return path
        return os.path.normpath(os.path.join(self.base_dir, path))

    @property
    def workdir_path(self):
        return self.resolve(self.workdir)

    def output(self, name):
        """
        :return: The path of an output file in the workdir, creating the
                 workdir if needed.
        """
        return os.path.join(ensure_dir(self.workdir_path), name)

    def override(self, **values):
        """
        Replaces values by the ones given; None means 'not given'.
        """
        for key, value in values.items():
            if value is None:
                continue
            if key == 'densities' or key == 'trials_per_density':
                plan = self.plan.to_dict()
                plan[key] = value
                self.plan = ExperimentPlan.from_dict(plan)
                continue
            if not hasattr(self, key):
                raise UsageError('Unknown setting %s' % key)
            setattr(self, key, value)
        # revalidate
        return PipelineConfig.from_dict(self.to_dict(), self.base_dir)

    def to_dict(self):
        d = {'sequences': [dict(s) for s in self.sequences],
             'workdir': self.workdir,
             'layout': self.layout.to_dict(),
             'plan': self.plan.to_dict()}
        for key, _, _ in _SCALARS:
            d[key] = getattr(self, key)
        return d

    @classmethod
    def from_dict(cls, d, base_dir=None):
        if not isinstance(d, dict):
            raise UsageError('The config must be a JSON object')
        d = dict(d)
        return cls(base_dir=base_dir, **d)

    def __eq__(self, other):
        return isinstance(other, PipelineConfig) and \
            self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self == other

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path):
        with open(path, 'w') as f:
            f.write(self.dumps())
            f.write('\n')


def load(path, environ=None):
    """
    Loads a config file. With no path, the defaults are used with the current
    directory as base.

    :param path: The JSON file, or None.
    :param environ: The environment (os.environ if None).
    :return: A PipelineConfig.
    """
    environ = os.environ if environ is None else environ
    if path is None:
        config = PipelineConfig()
    else:
        try:
            with open(path) as f:
                doc = json.load(f)
        except IOError as e:
            raise UsageError('Cannot read config %s: %s' % (path, e))
        except ValueError as e:
            raise UsageError('Config %s is not valid JSON: %s' % (path, e))
        config = PipelineConfig.from_dict(
            doc, os.path.dirname(os.path.abspath(path)))
    if environ.get(WORKDIR_ENV):
        _log.info('Workdir overridden by %s: %s'
                  % (WORKDIR_ENV, environ[WORKDIR_ENV]))
        config.workdir = environ[WORKDIR_ENV]
    return config
