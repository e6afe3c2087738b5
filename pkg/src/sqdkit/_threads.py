"""Thread-count plumbing for the numba kernels.

numba fixes its pool size at import from NUMBA_NUM_THREADS; the pool is made
at least 8 wide so benchmarks can request more threads than cores, then the
active count defaults to SQD_THREADS or the hardware parallelism.
"""

from __future__ import annotations

import os
import warnings

_HW = os.cpu_count() or 1
os.environ.setdefault("NUMBA_NUM_THREADS", str(max(_HW, 8)))

import numba  # noqa: E402

# numba probes TBB first and warns when the installed TBB is too old
warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

MAX_THREADS = int(numba.config.NUMBA_NUM_THREADS)


def default_threads() -> int:
    env = os.environ.get("SQD_THREADS")
    n = int(env) if env else _HW
    return max(1, min(n, MAX_THREADS))


def set_threads(n: int | None) -> int:
    """Set the kernel thread count (``None`` restores the default); returns it."""
    n = default_threads() if n is None else int(n)
    if not 1 <= n <= MAX_THREADS:
        raise ValueError(f"thread count must lie in [1, {MAX_THREADS}], got {n}")
    numba.set_num_threads(n)
    return n


def get_threads() -> int:
    return numba.get_num_threads()


set_threads(None)
