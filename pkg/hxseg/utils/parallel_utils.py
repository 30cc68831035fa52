"""
Thread-parallel map over independent work items.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

from joblib import delayed, Parallel


def ordered_map(func, items, n_jobs=1):
    """
    Apply a function to every item, returning results in input order.

    Threads share the caller's numpy state; numpy releases the GIL inside
    its kernels, so tile forwards overlap usefully.

    Parameters
    ----------
    func : callable
        Function of one item.
    items : iterable
        Work items.
    n_jobs : int, optional (default 1)
        Number of threads. 1 runs serially in the calling thread.
    """
    items = list(items)
    if n_jobs == 1 or len(items) < 2:
        return [func(item) for item in items]
    return Parallel(n_jobs=n_jobs, prefer='threads')(
        delayed(func)(item) for item in items)
