"""
A module to monitor the state of a run using counters.

A module using this functionality defines its own monitoring variables like:

  import statemon

  statemon.define("n_solves", int)

  def solve(...):
      statemon.state.increment('n_solves')

The valid types of variables are: int, float

All of the variables are namespaced by module name. So, if the above was in
sobolev.py, the variable has a full name of sobolev.n_solves, and can be read
from anywhere with:

  statemon.state.get('sobolev.n_solves')

When incrementing, use increment() instead of += because it is thread safe. The CLI logs snapshot() at the end of every
subcommand.
"""

import inspect
import multiprocessing
import os.path


class Error(Exception):
    """Exception raised by errors in the statemon module."""
    pass


class State(object):
    """A collection of state variables."""
    def __init__(self):
        self._lock = multiprocessing.RLock()
        self._vars = {}
        # statemon lives in the top level directory, so module names are
        # relative to it.
        self._root = os.path.abspath(os.path.dirname(__file__))

    def __getattr__(self, name):
        if name.startswith('_'):
            return self.__dict__[name]
        return self.get(self._local2global(name))

    def __setattr__(self, name, value):
        if name.startswith('_'):
            self.__dict__[name] = value
            return
        with self._lock:
            global_name = self._local2global(name)
            try:
                self._vars[global_name].value = value
            except KeyError:
                raise AttributeError("Unrecognized variable %r" % global_name)

    def get(self, global_name):
        with self._lock:
            try:
                return self._vars[global_name].value
            except KeyError:
                raise AttributeError("Unrecognized variable %r" % global_name)

    def _local2global(self, local, stack_depth=2):
        """
        Converts the local name of the variable to a global one, e.g. if
        define("n_solves", ...) is in sobolev.py, this returns
        "sobolev.n_solves". Stack depth controls how far back the module is
        found.
        """
        frame = inspect.currentframe()
        for _ in range(stack_depth):
            frame = frame.f_back
        mod = inspect.getmodule(frame)
        if mod is None or not hasattr(mod, '__file__'):
            prefix = '__main__'
        else:
            relpath = os.path.relpath(os.path.abspath(mod.__file__),
                                      self._root)
            prefix = '.'.join(os.path.splitext(relpath)[0].split(os.sep))
        return '%s.%s' % (prefix, local)

    def define(self, name, typ, default=None, stack_depth=2):
        """
        Define a new monitoring variable. Redefinitions are ignored.

        :param name: Name of the variable
        :param typ: int or float
        :param default: Default value. If not set, zero.
        :param stack_depth: Stack depth to your module
        """
        global_name = self._local2global(name, stack_depth=stack_depth)
        if global_name in self._vars:
            return
        if typ == int:
            typech = 'l'
        elif typ == float:
            typech = 'd'
        else:
            raise Error('Invalid type: %s' % typ)
        with self._lock:
            self._vars[global_name] = multiprocessing.Value(typech)
            if default is not None:
                self._vars[global_name].value = default

    def increment(self, name, diff=1, stack_depth=2):
        """
        Increments the state variable `name` of the calling module by diff,
        under the variable's own lock.
        """
        global_name = self._local2global(name, stack_depth=stack_depth)
        try:
            ref = self._vars[global_name]
        except KeyError:
            raise AttributeError("Unrecognized variable %r" % global_name)
        with ref.get_lock():
            ref.value += diff

    def snapshot(self):
        """
        :return: A dict of every variable's global name to its current value,
                 sorted by name.
        """
        with self._lock:
            return dict((k, self._vars[k].value) for k in sorted(self._vars))

    def reset(self):
        """
        Zeroes every variable. Only meant for unit tests.
        """
        with self._lock:
            for value in self._vars.values():
                with value.get_lock():
                    value.value = 0


state = State()
"""Global state variable object"""


def define(name, typ=int, default=None):
    return state.define(name, typ, default=default, stack_depth=3)
