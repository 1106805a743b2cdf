"""Ordered thread map; output order never depends on the worker count."""
from concurrent.futures import ThreadPoolExecutor

from ._kernels import threads


def ordered_map(fn, items, workers=None):
    items = list(items)
    n = threads() if workers is None else max(1, int(workers))
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
