"""Pure numpy implementations of the hot kernels (fallback backend)."""
from __future__ import annotations

import numpy as np

CHUNK = 1 << 18


def weighted_sup_4d(V, w1, w2, w3, w4):
    """``max log|V[i,j,k,l]| + w1[i] + w2[j] + w3[k] + w4[l]`` and its index.

    ``V`` may be complex or already an absolute value; the weights are
    log-weights.  Returns ``(-inf, (0, 0, 0, 0))`` when ``V`` vanishes.
    """
    n1 = V.shape[0]
    w34 = w3[:, None] + w4[None, :]
    best = -np.inf
    where = (0, 0, 0, 0)
    with np.errstate(divide="ignore"):
        for i in range(n1):
            block = np.log(np.abs(V[i])) + (w1[i] + w2)[:, None, None] + w34[None, :, :]
            j = int(np.argmax(block))
            val = block.flat[j]
            if val > best:
                best = float(val)
                where = (i,) + tuple(int(q) for q in np.unravel_index(j, block.shape))
    return best, where


def weighted_lp(absV, logw, p):
    """``sum (absV * exp(logw))**p`` (pairwise summation) or the max for ``p = inf``."""
    a = np.ravel(absV)
    lw = np.ravel(logw)
    if np.isinf(p):
        with np.errstate(divide="ignore"):
            return float(np.exp(np.max(np.log(a) + lw)))
    return float(np.sum((a * np.exp(lw)) ** p))


def kn_sum(phase, ys, coeffs):
    """``out[j] = sum_q coeffs[q] * exp(1j * phase[j] * ys[q])``."""
    phase = np.asarray(phase, dtype=float)
    out = np.empty(phase.shape[0], dtype=complex)
    step = max(1, CHUNK // max(1, ys.shape[0]))
    for s in range(0, phase.shape[0], step):
        out[s:s + step] = np.exp(1j * np.outer(phase[s:s + step], ys)) @ coeffs
    return out
