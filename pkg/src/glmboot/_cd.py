"""Compiled cyclic coordinate descent for quadratic + l1 subproblems."""

import numpy as np
from numba import njit


@njit(cache=True)
def cd_quadratic(H, a, beta, lam, tol, max_sweeps):
    """Minimize ``0.5 b'Hb - a'b + lam*||b||_1`` in place, starting from ``beta``.

    Coordinates with a non-positive diagonal are pinned to zero. Returns the
    number of sweeps; stops once no coordinate moved more than ``tol``.
    """
    k = a.shape[0]
    Hb = np.zeros(k)
    for j in range(k):
        bj = beta[j]
        if bj != 0.0:
            for i in range(k):
                Hb[i] += H[i, j] * bj
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        max_delta = 0.0
        for j in range(k):
            hjj = H[j, j]
            old = beta[j]
            if hjj <= 0.0:
                new = 0.0
            else:
                z = a[j] - Hb[j] + hjj * old
                if z > lam:
                    new = (z - lam) / hjj
                elif z < -lam:
                    new = (z + lam) / hjj
                else:
                    new = 0.0
            diff = new - old
            if diff != 0.0:
                for i in range(k):
                    Hb[i] += H[i, j] * diff
                beta[j] = new
                if abs(diff) > max_delta:
                    max_delta = abs(diff)
        if max_delta < tol:
            break
    return sweeps
