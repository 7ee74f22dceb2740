#
# utils.py - Helper utilities for ldpe
#
# Copyright 2026 The ldpe developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as
# published by the Free Software Foundation, either version 3 of the
# License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
import hashlib
import logging
import os
import tempfile

from ldpe.errors import DomainError

log = logging.getLogger('ldpe.utils')


def resolve_threads(threads=None):
    """ Size of the worker pool

    :param threads: a count, ``'auto'`` or None; None falls back to the
                    ``LDPE_THREADS`` environment variable
    :returns: number of workers, at least 1
    :rtype: int
    """
    if threads is None:
        threads = os.environ.get('LDPE_THREADS', 'auto')
    if threads == 'auto':
        return os.cpu_count() or 1
    try:
        threads = int(threads)
    except (TypeError, ValueError):
        raise DomainError("threads must be a count or 'auto', "
                          "got {t!r}".format(t=threads))
    if threads < 1:
        raise DomainError("threads must be >= 1")
    return threads


def parallel_map(func, items, threads=1):
    """ Apply func to every item on a pool of worker threads

    Results come back in input order, so the output does not depend on
    the number of threads.

    :param func: callable of one argument
    :param items: iterable of arguments
    :param int threads: worker count; 1 runs inline
    :rtype: list

    .. code::

        scores = utils.parallel_map(build, range(p), threads=4)
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


@contextmanager
def atomic_write(path, mode='w'):
    """ Write a file through a temporary sibling and rename on success

    Nothing is left behind at ``path`` if the body raises.

    .. code::

        with utils.atomic_write('fit.json') as f:
            json.dump(fit, f)
    """
    dirname = os.path.dirname(os.path.abspath(path))
    os.makedirs(dirname, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=dirname, prefix='.ldpe-', suffix='.tmp')
    try:
        with os.fdopen(fd, mode) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def content_hash(array, *extra):
    """ SHA-256 of an array's shape and float64 bytes

    :param array: numpy array
    :param extra: further values folded into the digest
    :rtype: str
    """
    h = hashlib.sha256()
    h.update(repr(array.shape).encode('ascii'))
    h.update(array.astype('<f8', copy=False).tobytes(order='C'))
    for e in extra:
        h.update(repr(e).encode('utf-8'))
    return h.hexdigest()


def fmt(x):
    """ Shortest round-trip decimal form of a float """
    return repr(float(x))


def parse_index_list(text, p=None):
    """ Parse 1-based comma separated indices into 0-based ints

    :param str text: e.g. ``"1,2,7"``
    :param int p: (optional) upper bound for validation
    :rtype: list
    """
    out = []
    for tok in text.split(','):
        tok = tok.strip()
        if not tok:
            continue
        try:
            j = int(tok)
        except ValueError:
            raise DomainError("not an index: {t!r}".format(t=tok))
        if j < 1 or (p is not None and j > p):
            raise DomainError("index {j} out of range 1..{p}".format(
                j=j, p=p))
        out.append(j - 1)
    return out
