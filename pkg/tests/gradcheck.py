"""Shared finite-difference gradient checking utilities.

Central differences in float64 with h=1e-5.  Instances whose leaky-ReLU
pre-activations sit within the step size of the kink are rejected by the
caller (the loss is only piecewise smooth there, so finite differences
measure a blended slope that no correct gradient can match).
"""

import numpy as np

H = 1e-5
KINK_MARGIN = 1e-3  # min |pre-activation| distance for a usable instance


def central_diff(loss_fn, param, h=H):
    """Finite-difference gradient of loss_fn() w.r.t. every param entry."""
    grad = np.zeros_like(param)
    it = np.nditer(param, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = param[idx]
        param[idx] = orig + h
        plus = loss_fn()
        param[idx] = orig - h
        minus = loss_fn()
        param[idx] = orig
        grad[idx] = (plus - minus) / (2 * h)
    return grad


def rel_error(analytic, numeric):
    num = np.abs(analytic - numeric).max()
    den = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
    return num / den


def disc_away_from_kinks(disc, *batches, margin=KINK_MARGIN):
    """True if every pre-activation stays clear of the leaky-ReLU kink."""
    for batch in batches:
        _, cache = disc.forward(batch)
        _, _, _, a1, _, a2, _, _ = cache
        if min(np.abs(a1).min(), np.abs(a2).min()) < margin:
            return False
    return True
