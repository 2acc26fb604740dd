"""
Handles color logging.
"""

import logging
import logging.handlers
from colorlog import ColoredFormatter

# everything graphbgs logs lives under this prefix, so that the root handlers
# can filter out the chatter of other libraries.
_PREFIX = 'graphbgs'
_FORMAT = "%(levelname)-8s %(asctime)s - %(name)s - %(funcName)s: %(message)s"
_DATEFMT = '%m/%d/%Y %I:%M:%S %p'


def config_root_logger(logfile=None, level=logging.INFO):
    """
    Sets up the root logger. Call this in the main() of the file.

    :param logfile: The filename to log to. If None, nothing is written to
                    disk.
    :param level: The level of the file handler.
    :return: The file handler, or None.
    """
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    if logfile is None:
        return None
    formatter = logging.Formatter(_FORMAT, datefmt=_DATEFMT)
    handler = logging.handlers.RotatingFileHandler(
        logfile,
        maxBytes=104857600,  # 100 MB
        backupCount=6)
    handler.addFilter(logging.Filter(name=_PREFIX))
    handler.setFormatter(formatter)
    handler.setLevel(level)
    root.addHandler(handler)
    return handler


def set_console_level(level):
    """
    Changes the level of every graphbgs console handler, e.g. for --quiet.
    """
    logging.getLogger(_PREFIX).setLevel(level)


def setup_logger(log_name):
    """
    Return a logger configured for a particular module.

    :param log_name: The name of the logger to use, normally __name__.
    """
    formatter = ColoredFormatter(
        "%(log_color)s" + _FORMAT,
        datefmt=_DATEFMT,
        reset=True,
        log_colors={
            'DEBUG':    'cyan',
            'INFO':     'green',
            'WARNING':  'yellow',
            'ERROR':    'red',
            'CRITICAL': 'red',
        }
    )
    parent = logging.getLogger(_PREFIX)
    if not parent.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(formatter)
        parent.addHandler(handler)
        parent.setLevel(logging.INFO)
    # the prefix is added so that the file handler can filter on it
    return logging.getLogger('%s.%s' % (_PREFIX, log_name))
