"""Kernel backend selection.

Imports the compiled Cython kernels when they are installed and working,
otherwise falls back to the NumPy implementations.  Set ``BILEX_NO_EXT=1``
to force the fallback (used by the benchmark to compare both backends).
"""

import os

import numpy as np

from . import _numpyops

BACKEND = "numpy"
_impl = _numpyops

if not os.environ.get("BILEX_NO_EXT"):
    try:
        from . import _fastops as _ext

        # Smoke-check the ABI before committing to the extension.
        _ext.topk_mean(np.zeros((2, 3)), 2)
        _impl = _ext
        BACKEND = "cython"
    except Exception:
        pass


def topk_mean(scores, k):
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    return _impl.topk_mean(scores, int(k))


def leaky_relu(x, slope):
    x = np.ascontiguousarray(x, dtype=np.float64)
    return _impl.leaky_relu(x.reshape(-1), float(slope)).reshape(x.shape)


def leaky_relu_grad(x, slope):
    x = np.ascontiguousarray(x, dtype=np.float64)
    return _impl.leaky_relu_grad(x.reshape(-1), float(slope)).reshape(x.shape)
