"""Finite-difference weights and derivative helpers on arbitrary (non-uniform) grids."""

from __future__ import annotations

import numpy as np


def fd_weights(x: np.ndarray, x0: float, m: int) -> np.ndarray:
    """Weights w such that sum(w*f(x)) approximates the m-th derivative of f at x0.

    Fornberg's recursion; exact for polynomials of degree len(x)-1.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if m >= n:
        raise ValueError("need more than m+1 nodes for the m-th derivative")
    w = np.zeros((n, m + 1))
    w[0, 0] = 1.0
    c1 = 1.0
    for i in range(1, n):
        c2 = 1.0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                # new row, using the previous row before it is updated below
                for k in range(min(i, m), -1, -1):
                    w[i, k] = c1 / c2 * ((k * w[i - 1, k - 1] if k else 0.0)
                                         - (x[i - 1] - x0) * w[i - 1, k])
            for k in range(min(i, m), -1, -1):
                w[j, k] = ((x[i] - x0) * w[j, k] - (k * w[j, k - 1] if k else 0.0)) / c3
        c1 = c2
    return w[:, m]


def gradient(z: np.ndarray, f: np.ndarray) -> np.ndarray:
    """First derivative on a non-uniform grid: centered interior, one-sided 2nd-order ends."""
    z = np.asarray(z, float)
    f = np.asarray(f, float)
    n = z.size
    if n < 3:
        raise ValueError("need at least 3 grid points")
    df = np.empty(n)
    h0 = z[1:-1] - z[:-2]
    h1 = z[2:] - z[1:-1]
    df[1:-1] = (f[2:] * h0**2 - f[:-2] * h1**2 + f[1:-1] * (h1**2 - h0**2)) / (h0 * h1 * (h0 + h1))
    df[0] = fd_weights(z[:3], z[0], 1) @ f[:3]
    df[-1] = fd_weights(z[-3:], z[-1], 1) @ f[-3:]
    return df


def second_derivative(z: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Second derivative on a non-uniform grid: centered interior, 4-node one-sided ends."""
    z = np.asarray(z, float)
    f = np.asarray(f, float)
    n = z.size
    if n < 4:
        raise ValueError("need at least 4 grid points")
    d2 = np.empty(n)
    h0 = z[1:-1] - z[:-2]
    h1 = z[2:] - z[1:-1]
    d2[1:-1] = 2.0 * (f[:-2] * h1 + f[2:] * h0 - f[1:-1] * (h0 + h1)) / (h0 * h1 * (h0 + h1))
    d2[0] = fd_weights(z[:4], z[0], 2) @ f[:4]
    d2[-1] = fd_weights(z[-4:], z[-1], 2) @ f[-4:]
    return d2
