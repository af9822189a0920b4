"""Ordered map over independent tasks, capped by ``ISAC_DP_THREADS``."""
import os
from concurrent.futures import ThreadPoolExecutor


def thread_count():
    raw = os.environ.get("ISAC_DP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """``[fn(x) for x in items]``, possibly on a thread pool. Results keep
    input order, so merges downstream are reproducible."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
