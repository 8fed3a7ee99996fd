"""Compiled fixed-step RK4 loops.

Both integrators take a generator that is affine in the two detunings,
``G(t) = G0 + dp(t) * G1 + d(t) * G2``, with the detunings supplied per
step at the three RK4 stage times (start, midpoint, end).
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _apply(G0, G1, G2, a, b, y, out):
    n = y.shape[0]
    for i in range(n):
        acc = 0j
        for j in range(n):
            acc += (G0[i, j] + a * G1[i, j] + b * G2[i, j]) * y[j]
        out[i] = acc


@njit(cache=True, nogil=True)
def _step(G0, G1, G2, dp, d, y, h, k1, k2, k3, k4, tmp):
    n = y.shape[0]
    _apply(G0, G1, G2, dp[0], d[0], y, k1)
    for i in range(n):
        tmp[i] = y[i] + 0.5 * h * k1[i]
    _apply(G0, G1, G2, dp[1], d[1], tmp, k2)
    for i in range(n):
        tmp[i] = y[i] + 0.5 * h * k2[i]
    _apply(G0, G1, G2, dp[1], d[1], tmp, k3)
    for i in range(n):
        tmp[i] = y[i] + h * k3[i]
    _apply(G0, G1, G2, dp[2], d[2], tmp, k4)
    for i in range(n):
        y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True, nogil=True)
def rk4_affine(G0, G1, G2, dp_stages, d_stages, y0, h, stride):
    """Integrate ``dy/dt = G(t) y`` and keep every ``stride``-th state."""
    n_steps = dp_stages.shape[0]
    n = y0.shape[0]
    out = np.empty((n_steps // stride + 1, n), dtype=np.complex128)
    y = y0.copy()
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    tmp = np.empty_like(k1)
    out[0] = y
    k = 1
    for s in range(n_steps):
        _step(G0, G1, G2, dp_stages[s], d_stages[s], y, h, k1, k2, k3, k4, tmp)
        if (s + 1) % stride == 0:
            out[k] = y
            k += 1
    return out


@njit(cache=True, nogil=True)
def rk4_state_extrema(G0, G1, G2, dp_stages, d_stages, y0, h):
    """Integrate a state vector; return the final state and per-level peak populations."""
    n_steps = dp_stages.shape[0]
    n = y0.shape[0]
    y = y0.copy()
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    tmp = np.empty_like(k1)
    peak = np.empty(n)
    for i in range(n):
        peak[i] = y[i].real ** 2 + y[i].imag ** 2
    for s in range(n_steps):
        _step(G0, G1, G2, dp_stages[s], d_stages[s], y, h, k1, k2, k3, k4, tmp)
        for i in range(n):
            p = y[i].real ** 2 + y[i].imag ** 2
            if p > peak[i]:
                peak[i] = p
    return y, peak


@njit(cache=True, nogil=True)
def _expm_small(A, out, tmp, term):
    """``exp(A)`` for a small dense matrix by scaling, Taylor(12) and squaring."""
    n = A.shape[0]
    norm = 0.0
    for i in range(n):
        row = 0.0
        for j in range(n):
            row += abs(A[i, j])
        norm = max(norm, row)
    s = 0
    while norm > 0.25:
        norm *= 0.5
        s += 1
    scale = 0.5**s
    for i in range(n):
        for j in range(n):
            out[i, j] = 0.0
            term[i, j] = 0.0
        out[i, i] = 1.0
        term[i, i] = 1.0
    for k in range(1, 13):
        for i in range(n):
            for j in range(n):
                acc = 0j
                for m in range(n):
                    acc += term[i, m] * A[m, j]
                tmp[i, j] = acc * (scale / k)
        for i in range(n):
            for j in range(n):
                term[i, j] = tmp[i, j]
                out[i, j] += tmp[i, j]
    for _ in range(s):
        for i in range(n):
            for j in range(n):
                acc = 0j
                for m in range(n):
                    acc += out[i, m] * out[m, j]
                tmp[i, j] = acc
        for i in range(n):
            for j in range(n):
                out[i, j] = tmp[i, j]


@njit(cache=True, nogil=True)
def magnus4_state_extrema(G0, G1, G2, dp_nodes, d_nodes, y0, h):
    """Fourth-order commutator-free Magnus integration of ``dy/dt = G(t) y``.

    ``dp_nodes`` and ``d_nodes`` hold the detunings at the two Gauss points of
    every step, shape ``(n_steps, 2)``. Each step applies two exponentials of
    fixed linear combinations of the generator at those points. Returns the
    final state and per-level peak populations at the step ends.
    """
    n_steps = dp_nodes.shape[0]
    n = y0.shape[0]
    r3 = np.sqrt(3.0) / 6.0
    a1 = 0.25 + r3
    a2 = 0.25 - r3
    A = np.empty((n, n), dtype=np.complex128)
    E = np.empty_like(A)
    tmp = np.empty_like(A)
    term = np.empty_like(A)
    y = y0.copy()
    z = np.empty_like(y)
    peak = np.empty(n)
    for i in range(n):
        peak[i] = y[i].real ** 2 + y[i].imag ** 2
    for s in range(n_steps):
        for half in range(2):
            # first factor (a1, a2), then (a2, a1)
            w1 = a1 if half == 0 else a2
            w2 = a2 if half == 0 else a1
            dp = w1 * dp_nodes[s, 0] + w2 * dp_nodes[s, 1]
            d = w1 * d_nodes[s, 0] + w2 * d_nodes[s, 1]
            for i in range(n):
                for j in range(n):
                    A[i, j] = h * ((w1 + w2) * G0[i, j] + dp * G1[i, j] + d * G2[i, j])
            _expm_small(A, E, tmp, term)
            for i in range(n):
                acc = 0j
                for j in range(n):
                    acc += E[i, j] * y[j]
                z[i] = acc
            for i in range(n):
                y[i] = z[i]
        for i in range(n):
            p = y[i].real ** 2 + y[i].imag ** 2
            if p > peak[i]:
                peak[i] = p
    return y, peak
