"""Numba kernels for the hot loops (increment transforms, row sums)."""

import numba as nb
import numpy as np


@nb.njit(cache=True, fastmath=True)
def cms_standard_stable(u, e, alpha):
    """Chambers-Mallows-Stuck transform, symmetric case.

    u: uniforms on (-pi/2, pi/2); e: unit exponentials.  Returns standard
    symmetric alpha-stable variates (cf exp(-|xi|^alpha)).  The exponent
    (1-alpha)/alpha vanishes at alpha = 1, reducing to tan(u) (Cauchy).
    """
    out = np.empty_like(u)
    inv_a = 1.0 / alpha
    c = (1.0 - alpha) * inv_a
    for i in range(u.shape[0]):
        ui = u[i]
        out[i] = (
            np.sin(alpha * ui)
            / np.cos(ui) ** inv_a
            * (np.cos((1.0 - alpha) * ui) / e[i]) ** c
        )
    return out


@nb.njit(cache=True)
def kahan_row_sums(a):
    """Compensated (Kahan) sum of each row of a 2-d array.

    No fastmath here: the compiler must not fold the compensation away.
    """
    m, n = a.shape
    out = np.empty(m)
    for i in range(m):
        s = 0.0
        c = 0.0
        for j in range(n):
            y = a[i, j] - c
            t = s + y
            c = (t - s) - y
            s = t
        out[i] = s
    return out
