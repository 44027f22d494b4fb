"""Numba acceleration switch.

Hot kernels throughout the package are decorated with :func:`njit`. When
numba is available (and ``DRIFTLAB_DISABLE_NUMBA`` is unset) they compile to
machine code; otherwise the same functions run as plain Python over numpy
arrays. Both paths consume random numbers in the same order, so results are
backend independent up to floating point associativity.

Set ``DRIFTLAB_DISABLE_NUMBA=1`` to force the fallback path. See
``benchmarks/bench_backends.py`` for a timing comparison.
"""

import os

_disable = os.environ.get("DRIFTLAB_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _disable not in ("", "0", "false", "no")

try:
    if NUMBA_DISABLED:
        raise ImportError("numba disabled via DRIFTLAB_DISABLE_NUMBA")
    from numba import njit as _numba_njit

    USING_NUMBA = True

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        return _numba_njit(*args, **kwargs)

except ImportError:
    USING_NUMBA = False

    def njit(*args, **kwargs):
        """No-op decorator standing in for numba.njit."""
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def backend_name():
    return "numba" if USING_NUMBA else "numpy"
