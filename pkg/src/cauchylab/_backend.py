"""Selection between numba-compiled kernels and the plain numpy path.

Set ``CAUCHYLAB_DISABLE_NUMBA=1`` before import to run every kernel as
ordinary Python/numpy code. The numerical algorithm is identical on both paths.
"""

from __future__ import annotations

import os

ENV_FLAG = "CAUCHYLAB_DISABLE_NUMBA"
THREADS_ENV = "CAUCHYLAB_THREADS"

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False


def numba_requested() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


USE_NUMBA = HAS_NUMBA and numba_requested()


def njit(fn):
    """Compile ``fn`` with numba (nopython, nogil)."""
    return numba.njit(cache=True, nogil=True)(fn)


def identity(fn):
    return fn


def thread_count() -> int:
    try:
        n = int(os.environ.get(THREADS_ENV, "1"))
    except ValueError:
        return 1
    return max(1, n)


kernel = njit if USE_NUMBA else identity


def parallel_map(fn, items):
    """Order-preserving map; threaded when ``CAUCHYLAB_THREADS`` > 1.

    Compiled kernels release the GIL, so threads give real concurrency for
    independent grid points or modes. Results never depend on thread count.
    """
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
