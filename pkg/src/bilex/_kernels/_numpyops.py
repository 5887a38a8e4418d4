"""NumPy reference implementations of the hot kernels.

These are the fallback used when the compiled extension is unavailable and
the ground truth the extension is tested against.  Matrix products are not
here on purpose: those already go through BLAS in both backends.
"""

import numpy as np


def topk_mean(scores: np.ndarray, k: int) -> np.ndarray:
    """Row-wise mean of the k largest entries of a 2-d score matrix."""
    if scores.ndim != 2:
        raise ValueError("scores must be 2-d")
    m = scores.shape[1]
    if not 1 <= k <= m:
        raise ValueError(f"k={k} out of range for {m} columns")
    if k == m:
        return scores.mean(axis=1)
    part = np.partition(scores, m - k, axis=1)[:, m - k:]
    return part.mean(axis=1)


def leaky_relu(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x >= 0.0, x, slope * x)


def leaky_relu_grad(x: np.ndarray, slope: float) -> np.ndarray:
    """Derivative of leaky_relu w.r.t. its input, evaluated elementwise."""
    return np.where(x >= 0.0, 1.0, slope)
