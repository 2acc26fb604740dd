"""
Exports a class, ThreadPool, that executes independent jobs (Monte Carlo
trials, per-sequence feature extraction) in worker threads and collects their
results by key. I'm not using multiprocessing here because the jobs share
large read-only inputs (the graph, the solver factorization, the frames) that
should not be copied, and because the heavy lifting happens inside numpy /
scipy, which release the GIL.

Important info:
    Every job is submitted with a key. Results are returned as a list of
    (key, result) pairs sorted by key, so the output never depends on which
    worker picked up which job first. Jobs must not share mutable state.

Adapted from:
http://stackoverflow.com/a/7257510
"""

import queue
import threading
import traceback
import logger

_log = logger.setup_logger(__name__)


class _Worker(threading.Thread):
    """
    Worker objects actually perform the execution of the functions passed to
    them with the arguments.
    """
    def __init__(self, tasks, results, lock):
        """
        :param tasks: A Queue which stores tasks. A worker exits when it
                      dequeues the stop marker put by ThreadPool.close().
        :param results: The dict shared by all workers, key -> result.
        :param lock: The lock guarding results.
        :return: A _Worker() instance.
        """
        threading.Thread.__init__(self)
        self.tasks = tasks
        self.results = results
        self.lock = lock
        self.daemon = True
        self.start()

    def run(self):
        """
        Dequeues a task from the tasks queue, and executes the function.
        Exceptions are stored in place of the result, and re-raised by
        ThreadPool.wait_completion().
        """
        while True:
            job = self.tasks.get()
            if job is _STOP:
                self.tasks.task_done()
                return
            key, func, args, kwargs = job
            res = None
            try:
                res = func(*args, **kwargs)
            except Exception as e:
                _log.error('Job %r failed:\n%s' % (key, traceback.format_exc()))
                res = _Failure(e)
            finally:
                with self.lock:
                    self.results[key] = res
                self.tasks.task_done()


_STOP = object()  # queued once per worker by ThreadPool.close()


class _Failure(object):
    def __init__(self, exc):
        self.exc = exc


class ThreadPool(object):
    """
    Implements a thread pool, which manages workers evaluating keyed jobs.
    With num_threads < 1 every job runs synchronously in add_task().
    """
    def __init__(self, num_threads):
        """
        :param num_threads: The number of workers to run.
        """
        self._results = {}
        self._lock = threading.Lock()
        self._keys = []
        self._sync = num_threads < 1
        self.tasks = queue.Queue()
        self._workers = []
        if not self._sync:
            for _ in range(num_threads):
                self._workers.append(_Worker(self.tasks, self._results,
                                             self._lock))

    def add_task(self, key, func, *args, **kwargs):
        """
        Adds a task to the queue.

        :param key: A sortable, unique job key.
        :param func: The function to evaluate.
        :param args: Function arguments.
        :param kwargs: Function keyword arguments.
        """
        if key in self._keys:
            raise ValueError('Duplicate job key %r' % (key,))
        self._keys.append(key)
        if self._sync:
            try:
                self._results[key] = func(*args, **kwargs)
            except Exception as e:
                _log.error('Job %r failed:\n%s' % (key, traceback.format_exc()))
                self._results[key] = _Failure(e)
            return
        self.tasks.put((key, func, args, kwargs))

    def wait_completion(self):
        """
        Waits for all the jobs to be finished.

        :return: A list of (key, result) sorted by key. If any job raised,
                 the exception of the first failed job (by key order) is
                 raised here instead.
        """
        self.tasks.join()
        with self._lock:
            out = sorted(self._results.items(), key=lambda kv: kv[0])
            self._results.clear()
            self._keys = []
        for key, res in out:
            if isinstance(res, _Failure):
                raise res.exc
        return out

    def close(self):
        """
        Stops and joins the workers. Jobs added afterwards run in the calling
        thread.
        """
        for _ in self._workers:
            self.tasks.put(_STOP)
        for w in self._workers:
            w.join()
        self._workers = []
        self._sync = True


def map_keyed(func, keyed_args, num_threads):
    """
    Convenience wrapper: runs func(*args) for every (key, args) in
    keyed_args and returns [(key, result), ...] sorted by key.
    """
    pool = ThreadPool(num_threads)
    try:
        for key, args in keyed_args:
            pool.add_task(key, func, *args)
        return pool.wait_completion()
    finally:
        pool.close()
