"""Numeric kernel backend selection.

The compiled Cython module is preferred when present; the pure-numpy
fallback is API-identical. Set FSTCBDG_KERNELS=numpy (or =cython) to force
a backend, e.g. when benchmarking or debugging.
"""

import os

from fstcbdg._kernels import _numpy

_requested = os.environ.get("FSTCBDG_KERNELS", "").strip().lower()

if _requested == "numpy":
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from fstcbdg._kernels import _core as _impl

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "FSTCBDG_KERNELS=cython but the compiled extension is not "
                "available; build it with `pip install -e .` or unset the "
                "variable to use the numpy fallback."
            )
        _impl = _numpy
        BACKEND = "numpy"

LOG_FLOOR = _impl.LOG_FLOOR
linear_probs = _impl.linear_probs
soft_cross_entropy = _impl.soft_cross_entropy
hard_cross_entropy = _impl.hard_cross_entropy
add_soft_grads = _impl.add_soft_grads
add_hard_grads = _impl.add_hard_grads
momentum_step = _impl.momentum_step
