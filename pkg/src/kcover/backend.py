"""Kernel backend selection.

The hot numeric kernels in :mod:`kcover.kernels` are written once as plain
Python/NumPy functions and compiled with numba's ``@njit`` by default.  Set
``KCOVER_BACKEND=numpy`` before import to skip compilation; the same source
then runs in the interpreter (much slower, but dependency-light and handy
for debugging).  ``benchmarks/bench_kernels.py`` compares the two paths.
"""

import os

BACKEND = os.environ.get("KCOVER_BACKEND", "numba").strip().lower()

if BACKEND not in ("numba", "numpy"):
    raise ValueError(
        f"KCOVER_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}"
    )

if BACKEND == "numba":
    try:
        from numba import njit, prange
    except ImportError:  # pragma: no cover - numba is a hard dependency
        BACKEND = "numpy"

if BACKEND == "numpy":

    def njit(*args, **kwargs):
        """No-op stand-in for numba.njit."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap

    prange = range

USING_NUMBA = BACKEND == "numba"


def set_jobs(n: int) -> None:
    """Bound the numba threading layer to n workers (no-op in numpy mode)."""
    if not USING_NUMBA or n is None:
        return
    import numba

    try:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    except ValueError:
        pass
