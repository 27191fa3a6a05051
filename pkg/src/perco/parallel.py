"""Ordered trial farm.

Trials are pure functions of their index and seed, so the pool only changes
wall time: results come back in trial order whatever the worker count.
"""
from __future__ import annotations

import multiprocessing as mp
from typing import Callable, Iterable, Sequence


def run_trials(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``[fn(item) for item in items]`` on up to ``workers`` processes."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    ctx = mp.get_context("fork")
    with ctx.Pool(processes=min(workers, len(items))) as pool:
        return list(pool.imap(fn, items, chunksize=1))


def chunks(seq: Iterable, size: int):
    buf = []
    for x in seq:
        buf.append(x)
        if len(buf) == size:
            yield buf
            buf = []
    if buf:
        yield buf
