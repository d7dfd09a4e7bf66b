from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def chunk_ranges(lo: int, hi: int, size: int) -> list[tuple[int, int]]:
    return [(s, min(hi, s + size)) for s in range(lo, hi, size)]


def map_ordered(fn, items, threads: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool; order is kept."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
