"""Opt-in thread parallelism for per-plane work.

Work is only ever split at whole-plane granularity and every plane is
computed by the same arithmetic whether it runs on the pool or inline, so
results are bit-identical for any thread count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ValidationError

_THREADS = 1


def set_thread_count(n: int) -> int:
    """Set worker threads for plane-level maps; 0 means auto (CPU count)."""
    global _THREADS
    n = int(n)
    if n < 0:
        raise ValidationError(f"threads must be >= 0, got {n}")
    _THREADS = n if n > 0 else (os.cpu_count() or 1)
    return _THREADS


def get_thread_count() -> int:
    return _THREADS


def plane_map(fn, planes) -> list:
    """[fn(p) for p in planes], fanned out over the configured pool."""
    items = list(planes)
    if _THREADS <= 1 or len(items) <= 1:
        return [fn(p) for p in items]
    with ThreadPoolExecutor(max_workers=min(_THREADS, len(items))) as pool:
        return list(pool.map(fn, items))
