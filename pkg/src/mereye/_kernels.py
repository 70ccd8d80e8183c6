"""Numba kernels for the sequential hot loops (slew limiting, lattice recursion).

Each kernel processes a [batch, n] block row by row with an identical scalar
operation sequence per row, so results are bit-identical for any batching of
the same rows.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def slew_limit_2d(x: np.ndarray, max_step: float) -> np.ndarray:
    """Rate-limit each row to at most ``max_step`` per sample, starting settled."""
    out = np.empty_like(x)
    for r in range(x.shape[0]):
        prev = x[r, 0]
        out[r, 0] = prev
        for i in range(1, x.shape[1]):
            d = x[r, i] - prev
            if d > max_step:
                d = max_step
            elif d < -max_step:
                d = -max_step
            prev = prev + d
            out[r, i] = prev
    return out


@njit(cache=True)
def lattice_2d(d: np.ndarray, n_delay: int, gamma_s: float, gamma_l: float,
               att: float) -> np.ndarray:
    """Two-reflection transmission-line recursion on driver output ``d``.

    Forward wave f(t) = d(t) + gamma_s*att*g(t-Td); backward wave
    g(t) = gamma_l*att*f(t-Td); load voltage (1+gamma_l)*att*f(t-Td).
    Delay lines start in the steady state of each row's first sample.
    """
    nb, n = d.shape
    out = np.empty_like(d)
    fbuf = np.empty(n_delay, dtype=np.float64)
    gbuf = np.empty(n_delay, dtype=np.float64)
    loop = gamma_s * gamma_l * att * att
    for r in range(nb):
        f0 = d[r, 0] / (1.0 - loop)
        g0 = gamma_l * att * f0
        for j in range(n_delay):
            fbuf[j] = f0
            gbuf[j] = g0
        for i in range(n):
            j = i % n_delay
            f_del = fbuf[j]
            g_del = gbuf[j]
            out[r, i] = (1.0 + gamma_l) * att * f_del
            fbuf[j] = d[r, i] + gamma_s * att * g_del
            gbuf[j] = gamma_l * att * f_del
    return out
