"""Pure-numpy reference implementation of the compiled kernels."""
from __future__ import annotations

import numpy as np


def riccati_rk4(upper, lower, alpha, r0):
    """Integrate ``R' = R Q (alpha R - I)`` across all steps with classical RK4.

    ``upper`` and ``lower`` have shape ``(n_steps, 3, d, d)`` and hold the
    step-scaled off-diagonal blocks of ``Q`` at the start, midpoint and end
    of each step.  Returns the final ``2d x 2d`` matrix.
    """
    d = upper.shape[-1]
    R = np.array(r0, dtype=complex, copy=True)
    G = np.empty_like(R)

    def rhs(Y, up, lo):
        np.matmul(Y[:, d:], lo, out=G[:, :d])
        np.matmul(Y[:, :d], up, out=G[:, d:])
        return alpha * (G @ Y) - G

    for j in range(upper.shape[0]):
        up, lo = upper[j], lower[j]
        k1 = rhs(R, up[0], lo[0])
        k2 = rhs(R + 0.5 * k1, up[1], lo[1])
        k3 = rhs(R + 0.5 * k2, up[1], lo[1])
        k4 = rhs(R + k3, up[2], lo[2])
        R += (k1 + 2.0 * (k2 + k3) + k4) / 6.0
    return R
