"""Compiled inner loops shared by the exact engine and the samplers."""

import numba
import numpy as np


@numba.njit(cache=True)
def solve_leaf(x, acc_hi, acc_lo, rhs, ker, sign, lo, hi):
    """Finish x[lo:hi] of x_n = rhs_n + sign * sum_{k<n} x_k ker_{n-k}.

    Contributions from indices below ``lo`` must already sit in the
    compensated accumulator (acc_hi, acc_lo).
    """
    for n in range(lo, hi):
        s = acc_hi[n]
        c = -acc_lo[n]
        for k in range(lo, n):
            y = x[k] * ker[n - k] - c
            t = s + y
            c = (t - s) - y
            s = t
        x[n] = rhs[n] + sign * (s - c)


@numba.njit(cache=True)
def compensated_cumsum(a):
    out = np.empty_like(a)
    s = 0.0
    c = 0.0
    for i in range(a.shape[0]):
        y = a[i] - c
        t = s + y
        c = (t - s) - y
        s = t
        out[i] = s
    return out
