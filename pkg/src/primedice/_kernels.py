"""Compiled inner loops for the float DP."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def window_pass(old, M, out):
    """out[j] = sum(old[max(0, j-M+1) : j+1]) for j in [0, n+M-1).

    Running window sums. The left half is swept left-to-right and the right
    half right-to-left, so each sweep climbs toward the bulk of the mass and
    tiny tail values keep their relative accuracy (no cancellation against a
    large running total).
    """
    n = old.shape[0]
    m = n + M - 1
    mid = m // 2

    s = 0.0
    for j in range(mid):
        if j < n:
            s += old[j]
        i = j - M
        if 0 <= i < n:
            s -= old[i]
        out[j] = s if s > 0.0 else 0.0

    s = 0.0
    for j in range(m - 1, mid - 1, -1):
        i = j - M + 1
        if 0 <= i < n:
            s += old[i]
        if j + 1 < n:
            s -= old[j + 1]
        out[j] = s if s > 0.0 else 0.0


@njit(cache=True)
def take_targets(out, idx):
    """Zero out[idx] and return the compensated sum of what was removed."""
    s = 0.0
    c = 0.0
    for k in range(idx.shape[0]):
        x = out[idx[k]]
        out[idx[k]] = 0.0
        t = s + x
        if abs(s) >= x:
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c


def warmup() -> None:
    a = np.ones(3)
    o = np.empty(4)
    window_pass(a, 2, o)
    take_targets(o, np.array([1], dtype=np.int64))
