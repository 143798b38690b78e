"""Independent reference computations used by the tests.

None of these call into the package's numerical routes: they are brute
force grids, textbook recurrences or closed forms derived by hand.
"""
from __future__ import annotations

import math

import numpy as np


def fornberg_weights(x0: float, xs, m: int) -> np.ndarray:
    """Finite-difference weights for derivatives 0..m at ``x0`` on nodes ``xs`` (Fornberg 1988)."""
    xs = np.asarray(xs, dtype=float)
    n = xs.size
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def fd_derivative(f, x: float, n: int, h: float | None = None, half: int = 10) -> complex:
    """``f^(n)(x)`` from a centred stencil with ``2 half + 1`` nodes.

    The default step grows with the order to keep roundoff (``~ eps / h^n``) small.
    """
    if h is None:
        h = 0.05 if n <= 3 else 0.08
    nodes = x + h * np.arange(-half, half + 1)
    w = fornberg_weights(x, nodes, n)[:, n]
    return complex(np.sum(w * f(nodes)))


def young_conjugate_grid(omega_exp, y: float, t_max: float = 100.0, step: float = 1e-4) -> float:
    """``max_{t in [0, t_max]} (y t - omega(e^t))`` on a uniform grid."""
    t = np.arange(0.0, t_max + step / 2, step)
    return float(np.max(y * t - omega_exp(t)))


def partition_counts(n_max: int) -> list:
    """``p(0..n_max)`` by the coin-change recurrence (generating function product)."""
    p = [1] + [0] * n_max
    for part in range(1, n_max + 1):
        for total in range(part, n_max + 1):
            p[total] += p[total - part]
    return p


def faa_sum_bruteforce(n: int) -> int:
    """``sum k!/prod k_j!`` over partitions ``n = sum j k_j``, by recursive enumeration."""
    def rec(remaining, largest):
        if remaining == 0:
            yield []
            return
        for part in range(min(remaining, largest), 0, -1):
            for rest in rec(remaining - part, part):
                yield [part] + rest

    total = 0
    for parts in rec(n, n):
        counts = {}
        for q in parts:
            counts[q] = counts.get(q, 0) + 1
        k = len(parts)
        denom = 1
        for c in counts.values():
            denom *= math.factorial(c)
        total += math.factorial(k) // denom
    return total


def gaussian_stft(x, xi):
    """``V_g g`` for ``g = 2^{1/4} exp(-pi t^2)``: ``exp(-pi i x xi - pi (x^2 + xi^2)/2)``."""
    x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
    return np.exp(-1j * np.pi * x * xi - np.pi * (x * x + xi * xi) / 2)


def gauss(t, a=1.0, x0=0.0, beta=0.0, amp=None):
    """``amp exp(-pi a (t - x0)^2) exp(2 pi i beta t)`` evaluated directly."""
    amp = (2 * a) ** 0.25 if amp is None else amp
    t = np.asarray(t, float)
    return amp * np.exp(-np.pi * a * (t - x0) ** 2 + 2j * np.pi * beta * t)


def riemann_stft(fv, t, g, x, xi):
    """Direct Riemann sum of the STFT integral for sampled ``fv`` at one point."""
    dt = t[1] - t[0]
    return complex(np.sum(fv * np.conj(g(t - x)) * np.exp(-2j * np.pi * t * xi)) * dt)


def product_poly(K: int, s: float) -> np.ndarray:
    """Ascending coefficients of ``prod_{k<=K} (1 + z^2 / k^{2s})`` by repeated convolution."""
    c = np.array([1.0])
    for k in range(1, K + 1):
        c = np.convolve(c, [1.0, 0.0, k ** (-2.0 * s)])
    return c


def hermite_physicists(n: int, x):
    """``H_n`` by the three-term recurrence."""
    x = np.asarray(x, float)
    h0, h1 = np.ones_like(x), 2 * x
    if n == 0:
        return h0
    for k in range(1, n):
        h0, h1 = h1, 2 * x * h1 - 2 * k * h0
    return h1
