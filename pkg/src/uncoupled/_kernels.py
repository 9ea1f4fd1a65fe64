"""Compiled helpers shared by the simulators."""
import numpy as np
from numba import njit


@njit(cache=True)
def utility_value(kinds, p0, p1, xs, ys, npts, i, x):
    if kinds[i] == 0:
        return p1[i] * (np.log(p0[i] + x) - np.log(p0[i]))
    n = npts[i]
    return np.interp(x, xs[i, :n], ys[i, :n])


@njit(cache=True)
def sample_index(cum, u):
    n = cum.shape[0]
    for k in range(n):
        if u < cum[k]:
            return k
    return n - 1
