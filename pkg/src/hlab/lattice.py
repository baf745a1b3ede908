"""Periodic lattice geometry, discrete difference operators, Fourier transforms.

The torus Z^d / L Z^d stands in for the infinite lattice everywhere in this
package.  Sites are d-tuples with components in [-L/2, L/2) and periodic
wraparound; storage is row-major over the [0, L) aliases so that every field
is FFT-compatible as sampled.

Conventions used by every module (do not introduce private transforms):

    forward difference   (grad f)_j(x)  = f(x + e_j) - f(x)
    adjoint difference   (grad* g)(x)   = sum_j g_j(x - e_j) - g_j(x)
    twisted versions     (grad_xi f)_j(x)  = exp(-i xi_j) f(x + e_j) - f(x)
                         (grad*_xi g)(x)   = sum_j exp(+i xi_j) g_j(x - e_j) - g_j(x)
    Fourier transform    fhat(zeta) = sum_x f(x) exp(+i x.zeta)
    inversion            f(x) = N^{-1} sum_zeta fhat(zeta) exp(-i x.zeta)

with zeta running over the dual lattice {2 pi k / L : k in [-L/2, L/2)}^d.
The symbol of the forward difference is e_j(xi) = exp(-i xi_j) - 1, so the
five-point (2d+1 point) Laplacian grad* grad has symbol
|e(xi)|^2 = sum_j 2 (1 - cos xi_j).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TorusGrid:
    """Periodic cubic lattice with dim axes of even length side."""

    dim: int
    side: int

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"grid dim must be >= 1, got {self.dim}")
        if self.side < 2 or self.side % 2 != 0:
            raise ValueError(f"grid side must be even and >= 2, got {self.side}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.dim

    @property
    def n_sites(self) -> int:
        return self.side**self.dim

    def coordinate_arrays(self) -> np.ndarray:
        """Centered integer coordinates, shape (dim, side, ..., side).

        Entry [j, idx] is the representative of idx in [-L/2, L/2), i.e. the
        same ordering np.fft uses for frequencies.
        """
        axis = (np.fft.fftfreq(self.side) * self.side).astype(np.int64)
        grids = np.meshgrid(*([axis] * self.dim), indexing="ij")
        return np.stack(grids)

    def radius(self) -> np.ndarray:
        """Euclidean distance of each site from the origin (min over aliases)."""
        x = self.coordinate_arrays().astype(np.float64)
        return np.sqrt(np.sum(x**2, axis=0))

    def dual_phases(self) -> np.ndarray:
        """Dual-lattice points 2 pi k / L, shape (dim, side, ..., side)."""
        axis = 2.0 * np.pi * np.fft.fftfreq(self.side)
        grids = np.meshgrid(*([axis] * self.dim), indexing="ij")
        return np.stack(grids)

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Map integer coordinates onto the storage aliases in [0, L)."""
        return np.mod(np.asarray(x, dtype=np.int64), self.side)


def _check_scalar(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f)
    if f.shape != grid.shape:
        raise ValueError(f"scalar field shape {f.shape} != grid shape {grid.shape}")
    return f


def _check_vector(grid: TorusGrid, g: np.ndarray) -> np.ndarray:
    g = np.asarray(g)
    if g.shape != (grid.dim,) + grid.shape:
        raise ValueError(
            f"vector field shape {g.shape} != {(grid.dim,) + grid.shape}"
        )
    return g


@dataclass
class ScalarField:
    """One complex (or real) value per site."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = _check_scalar(self.grid, self.values)


@dataclass
class VectorField:
    """One d-vector per site, stored component-major: values[j] is a scalar field."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = _check_vector(self.grid, self.values)


@dataclass
class MatrixField:
    """One d x d matrix per site, stored values[j, k] as scalar fields."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values)
        want = (self.grid.dim, self.grid.dim) + self.grid.shape
        if v.shape != want:
            raise ValueError(f"matrix field shape {v.shape} != {want}")
        self.values = v


def forward_gradient(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """(grad f)_j(x) = f(x + e_j) - f(x), periodic."""
    f = _check_scalar(grid, f)
    return np.stack([np.roll(f, -1, axis=j) - f for j in range(grid.dim)])


def adjoint_gradient(grid: TorusGrid, g: np.ndarray) -> np.ndarray:
    """(grad* g)(x) = sum_j [g_j(x - e_j) - g_j(x)], the adjoint of forward_gradient."""
    g = _check_vector(grid, g)
    out = np.zeros(grid.shape, dtype=g.dtype)
    for j in range(grid.dim):
        out += np.roll(g[j], 1, axis=j) - g[j]
    return out


def twisted_gradient(grid: TorusGrid, f: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """(grad_xi f)_j(x) = exp(-i xi_j) f(x + e_j) - f(x); equals forward_gradient at xi=0."""
    f = _check_scalar(grid, f)
    xi = np.asarray(xi, dtype=np.float64).reshape(grid.dim)
    phase = np.exp(-1j * xi)
    return np.stack(
        [phase[j] * np.roll(f, -1, axis=j) - f for j in range(grid.dim)]
    )


def adjoint_twisted_gradient(grid: TorusGrid, g: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """(grad*_xi g)(x) = sum_j [exp(+i xi_j) g_j(x - e_j) - g_j(x)]."""
    g = _check_vector(grid, g)
    xi = np.asarray(xi, dtype=np.float64).reshape(grid.dim)
    phase = np.exp(1j * xi)
    out = np.zeros(grid.shape, dtype=np.result_type(g.dtype, phase.dtype))
    for j in range(grid.dim):
        out += phase[j] * np.roll(g[j], 1, axis=j) - g[j]
    return out


def gradient_symbol(xi: np.ndarray) -> np.ndarray:
    """Symbol of the forward difference: e_j(xi) = exp(-i xi_j) - 1."""
    xi = np.asarray(xi, dtype=np.float64)
    return np.exp(-1j * xi) - 1.0


def laplacian_symbol(grid: TorusGrid, xi: np.ndarray | None = None) -> np.ndarray:
    """|e(xi + zeta)|^2 = sum_j 2 (1 - cos(xi_j + zeta_j)) over the dual lattice.

    The eigenvalue field of grad*_xi grad_xi in the Fourier representation.
    """
    zeta = grid.dual_phases()
    if xi is not None:
        xi = np.asarray(xi, dtype=np.float64).reshape(grid.dim)
        zeta = zeta + xi.reshape((grid.dim,) + (1,) * grid.dim)
    return np.sum(2.0 * (1.0 - np.cos(zeta)), axis=0)


def shifted_gradient_symbol(grid: TorusGrid, xi: np.ndarray | None = None) -> np.ndarray:
    """e(xi + zeta) over the dual lattice, shape (dim, side, ..., side)."""
    zeta = grid.dual_phases()
    if xi is not None:
        xi = np.asarray(xi, dtype=np.float64).reshape(grid.dim)
        zeta = zeta + xi.reshape((grid.dim,) + (1,) * grid.dim)
    return np.exp(-1j * zeta) - 1.0


def dft(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """fhat(zeta) = sum_x f(x) exp(+i x.zeta); spatial axes are the trailing dim axes."""
    f = np.asarray(f)
    axes = tuple(range(f.ndim - grid.dim, f.ndim))
    return np.fft.ifftn(f, axes=axes) * grid.n_sites


def idft(grid: TorusGrid, fhat: np.ndarray) -> np.ndarray:
    """f(x) = N^{-1} sum_zeta fhat(zeta) exp(-i x.zeta); inverse of dft."""
    fhat = np.asarray(fhat)
    axes = tuple(range(fhat.ndim - grid.dim, fhat.ndim))
    return np.fft.fftn(fhat, axes=axes) / grid.n_sites


def constant_coeff_green(eta: float, grid: TorusGrid) -> np.ndarray:
    """Torus kernel of (eta + grad* grad)^{-1} delta_0 by spectral division.

    Ghat(zeta) = 1 / (eta + |e(zeta)|^2).  Rejects eta <= 0: the torus zero
    mode makes the resolvent blow up at eta = 0.
    """
    if eta <= 0:
        raise ValueError(f"eta must be > 0, got {eta}")
    ghat = 1.0 / (eta + laplacian_symbol(grid))
    g = idft(grid, ghat.astype(np.complex128))
    return np.ascontiguousarray(g.real)
