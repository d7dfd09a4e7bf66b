"""Hot loops, compiled with numba unless ``SBMTEST_DISABLE_NUMBA`` is set.

Both backends expose identical functions.  The histogram kernels return
integer counts and therefore agree bit-for-bit; the benchmark in
``benchmarks/bench_backends.py`` compares their speed.
"""

import os

from . import _numpy

_disabled = os.environ.get("SBMTEST_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

if _disabled:
    _backend = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _backend
    except ImportError:  # numba missing
        _backend = _numpy
        BACKEND = "numpy"
    else:
        BACKEND = "numba"

mc_histogram = _backend.mc_histogram
enum_histogram = _backend.enum_histogram
count_cycles = _backend.count_cycles
power_iteration = _backend.power_iteration

__all__ = ["BACKEND", "mc_histogram", "enum_histogram", "count_cycles", "power_iteration"]
