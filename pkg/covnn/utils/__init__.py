# -*- coding: utf-8 -*-
# @Time    : 2024/9/20 11:05
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : __init__.py

import os
import sys
import logging
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import CovnnIOError, ConfigError

logger = logging.getLogger(__name__)

THREADS_ENV = 'COVNN_THREADS'


def setup_logging(level='INFO', stream=None):
    """
    Configure the covnn logger with a single stream handler

    :param level: str or int, logging level, default is 'INFO'
    :param stream: file-like object, default is sys.stderr
    :return: logging.Logger, the package logger
    """
    root = logging.getLogger('covnn')
    for handler in list(root.handlers):
        if not isinstance(handler, logging.NullHandler):
            root.removeHandler(handler)
    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s'))
    root.addHandler(handler)
    root.setLevel(level.upper() if isinstance(level, str) else level)
    return root


def resolve_threads(threads=None):
    """
    Resolve the fan-out width: explicit value, then $COVNN_THREADS, then 1

    :param threads: int, explicit thread count, default is None
    :return: int, number of worker threads (>= 1)
    """
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env is None or env.strip() == '':
            return 1
        try:
            threads = int(env)
        except ValueError:
            raise ConfigError(f'{THREADS_ENV} must be an integer, got {env!r}')
    if threads < 1:
        raise ConfigError(f'thread count must be >= 1, got {threads}')
    return threads


def parallel_map(fn, items, threads=None):
    """
    Map fn over items, results returned in input order

    :param fn: callable applied to every item
    :param items: iterable of inputs
    :param threads: int, worker count, default resolves from the environment
    :return: list, fn(item) for every item in order
    """
    items = list(items)
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def derive_seed(seed, *keys):
    """
    Integer seed of the stream identified by (seed, *keys)

    :param seed: int, global seed
    :param keys: ints or strings naming the stream (e.g. 'trial', n, index)
    :return: int
    """
    entropy = [int(seed)]
    for key in keys:
        if isinstance(key, str):
            # stable across runs, unlike hash()
            entropy.append(int.from_bytes(key.encode('utf-8'), 'little'))
        else:
            entropy.append(int(key))
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


def derive_rng(seed, *keys):
    """Independent generator for the stream identified by (seed, *keys)"""
    return np.random.default_rng(derive_seed(seed, *keys))


def atomic_write(path, text, encoding='utf-8'):
    """
    Write text to path through a temp file in the same directory and a rename

    :param path: str or os.PathLike, destination
    :param text: str, full file content
    :param encoding: str, default is 'utf-8'
    :return: str, the destination path
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix='.tmp-', dir=directory)
        try:
            with os.fdopen(fd, 'w', encoding=encoding, newline='') as f:
                f.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise
    except OSError as e:
        raise CovnnIOError(f'cannot write file ({e.strerror})', path)
    return path


def read_text(path, encoding='utf-8'):
    try:
        with open(path, 'r', encoding=encoding) as f:
            return f.read()
    except OSError as e:
        raise CovnnIOError(f'cannot read file ({e.strerror})', path)


def chunked(index, size):
    """Consecutive slices of an index array, the last one possibly shorter"""
    return [index[i:i + size] for i in range(0, len(index), size)]
