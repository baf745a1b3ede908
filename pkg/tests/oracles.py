"""Independently coded reference values for the test suite.

Everything here is assembled from dense matrices or closed forms, never
from the package's FFT or conjugate-gradient machinery, so agreement is
meaningful.  Keep these slow and obvious.
"""

from __future__ import annotations

import numpy as np


def harmonic_mean(a_line: np.ndarray) -> float:
    return float(1.0 / np.mean(1.0 / np.asarray(a_line, dtype=float)))


def twisted_difference_matrix(L: int, xi: float) -> np.ndarray:
    """Dense L x L matrix of f -> exp(-i xi) f(x+1) - f(x) on the circle."""
    D = -np.eye(L, dtype=np.complex128)
    for x in range(L):
        D[x, (x + 1) % L] += np.exp(-1j * xi)
    return D


def q_1d_bordered(a_line: np.ndarray, xi: float, eta: float) -> complex:
    """Effective symbol in d = 1 from a dense bordered linear system.

    The corrector is found by assembling eta I + D^H diag(a) D with the
    zero-mean constraint appended as an extra row/column, then the symbol
    is the averaged flux a (D phi + 1).
    """
    a_line = np.asarray(a_line, dtype=float)
    L = a_line.size
    D = twisted_difference_matrix(L, xi)
    A = D.conj().T @ np.diag(a_line) @ D
    M = np.zeros((L + 1, L + 1), dtype=np.complex128)
    M[:L, :L] = eta * np.eye(L) + A
    M[:L, L] = -1.0
    M[L, :L] = 1.0 / L
    rhs = np.zeros(L + 1, dtype=np.complex128)
    rhs[:L] = -(D.conj().T @ a_line)
    sol = np.linalg.solve(M, rhs)
    phi = sol[:L]
    flux = a_line * (D @ phi + 1.0)
    return complex(np.mean(flux))


def infinite_green_1d(eta: float) -> float:
    """G_eta(0) on the infinite one-dimensional lattice."""
    return 1.0 / np.sqrt(eta * (eta + 4.0))


def dft_slow(side: int, dim: int, f: np.ndarray) -> np.ndarray:
    """Direct O(N^2) transform matching sum_x f(x) exp(+i zeta . x)."""
    freqs = 2.0 * np.pi * np.fft.fftfreq(side)
    coords = np.arange(side)
    out = np.zeros(f.shape, dtype=np.complex128)
    if dim == 1:
        for k in range(side):
            out[k] = np.sum(f * np.exp(1j * freqs[k] * coords))
        return out
    if dim == 2:
        for k1 in range(side):
            for k2 in range(side):
                phase = np.exp(
                    1j * (freqs[k1] * coords[:, None] + freqs[k2] * coords[None, :])
                )
                out[k1, k2] = np.sum(f * phase)
        return out
    raise ValueError("dft_slow supports dim 1 and 2 only")


def graph_laplacian_dense(side: int, dim: int) -> np.ndarray:
    """Dense nearest-neighbour Laplacian on the torus, one row per site."""
    shape = (side,) * dim
    n = side**dim
    Lap = np.zeros((n, n))
    for flat in range(n):
        x = np.unravel_index(flat, shape)
        Lap[flat, flat] = 2.0 * dim
        for j in range(dim):
            for s in (-1, 1):
                y = list(x)
                y[j] = (y[j] + s) % side
                Lap[flat, np.ravel_multi_index(tuple(y), shape)] -= 1.0
    return Lap


def resolvent_green_dense(side: int, dim: int, eta: float) -> np.ndarray:
    """Column of (eta + Laplacian)^(-1) for a source at the origin."""
    Lap = graph_laplacian_dense(side, dim)
    n = side**dim
    rhs = np.zeros(n)
    rhs[0] = 1.0
    g = np.linalg.solve(eta * np.eye(n) + Lap, rhs)
    return g.reshape((side,) * dim)
