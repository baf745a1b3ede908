"""Convex potentials, lattice field energies, and the samplers behind them.

The long-run distributional checks (covariance against the exact Gaussian
kernel, stationarity, Brascamp-Lierb bounds) live in the acceptance battery;
here we pin down the deterministic structure and the cheap statistics.
"""

import numpy as np
import pytest

from hlab.fieldtheory import (
    ConvexPotential,
    McmcControls,
    default_proxy_mass,
    energy,
    energy_gradient,
    moment_bound_check,
    sample_gradient_iid_1d,
    sample_massive_batch,
    sample_massive_field,
)
from hlab.lattice import TorusGrid
from hlab.rng import sample_stream


def test_potential_validation():
    with pytest.raises(ValueError):
        ConvexPotential(kappa=-0.1)
    with pytest.raises(ValueError):
        ConvexPotential(kappa=1.0, beta=0.0)
    V = ConvexPotential(kappa=2.0, beta=0.5)
    assert V.curvature_min == 1.0
    assert V.curvature_max == 2.0


def test_potential_gradient_matches_finite_differences():
    rng = np.random.default_rng(31)
    V = ConvexPotential(kappa=0.7, beta=1.3)
    z = rng.standard_normal((2, 5))
    h = 1e-6
    g = V.grad(z)
    for idx in np.ndindex(z.shape):
        zp = z.copy()
        zp[idx] += h
        zm = z.copy()
        zm[idx] -= h
        fd = (np.sum(V.value(zp)) - np.sum(V.value(zm))) / (2.0 * h)
        assert abs(fd - g[idx]) < 1e-6


def test_energy_gradient_matches_finite_differences():
    rng = np.random.default_rng(32)
    grid = TorusGrid(2, 4)
    V = ConvexPotential(kappa=0.5, beta=1.0)
    m = 0.8
    phi = rng.standard_normal(grid.shape)
    g = energy_gradient(grid, V, m, phi)
    h = 1e-6
    for idx in [(0, 0), (1, 3), (2, 2)]:
        phip = phi.copy()
        phip[idx] += h
        phim = phi.copy()
        phim[idx] -= h
        fd = (energy(grid, V, m, phip) - energy(grid, V, m, phim)) / (2.0 * h)
        assert abs(fd - g[idx]) < 1e-5


def test_gaussian_energy_closed_form():
    """For kappa = 0 the energy is the quadratic form of eta + grad* grad with eta = m^2."""
    rng = np.random.default_rng(33)
    grid = TorusGrid(2, 6)
    m = 0.9
    phi = rng.standard_normal(grid.shape)
    got = energy(grid, ConvexPotential(kappa=0.0), m, phi)
    want = 0.5 * float(phi.ravel() @ (energy_gradient(grid, ConvexPotential(0.0), m, phi)).ravel())
    assert abs(got - want) < 1e-9 * abs(want)


def test_mcmc_defaults_scale_with_side():
    c = McmcControls()
    assert c.burn_in_for(TorusGrid(2, 8)) == 50 * 64
    assert c.thinning_for(TorusGrid(2, 8)) == 64
    assert McmcControls(burn_in=17).burn_in_for(TorusGrid(2, 8)) == 17


def test_gradient_iid_sampler_statistics():
    grid = TorusGrid(1, 4096)
    sample = sample_gradient_iid_1d(grid, ConvexPotential(kappa=0.0), 5, 0)
    omega = sample.omega[0]
    assert omega.shape == grid.shape
    assert abs(omega.mean()) < 4.0 / np.sqrt(omega.size)
    assert abs(omega.var(ddof=1) - 1.0) < 4.0 * np.sqrt(2.0 / (omega.size - 1))
    again = sample_gradient_iid_1d(grid, ConvexPotential(kappa=0.0), 5, 0)
    assert np.array_equal(sample.omega, again.omega)


def test_gradient_iid_sampler_with_perturbation():
    """kappa > 0 tilts the density toward smaller |omega|."""
    grid = TorusGrid(1, 4096)
    tilted = sample_gradient_iid_1d(grid, ConvexPotential(kappa=2.0, beta=1.0), 5, 0)
    var = tilted.omega[0].var(ddof=1)
    assert var < 0.9
    assert tilted.diagnostics["rejections"] > 0


def test_mala_smoke_and_determinism():
    grid = TorusGrid(2, 8)
    V = ConvexPotential(kappa=0.0)
    controls = McmcControls(burn_in=200, thinning=16)
    s0 = sample_massive_field(grid, V, 1.0, controls, 77, 0)
    assert s0.phi.shape == grid.shape
    acc = s0.diagnostics["accept_rate"]
    assert 0.0 < acc < 1.0
    s0_again = sample_massive_field(grid, V, 1.0, controls, 77, 0)
    assert np.array_equal(s0.phi, s0_again.phi)


def test_mala_batch_composition_is_exact():
    """Batching chains never changes any single chain's draw."""
    grid = TorusGrid(2, 6)
    V = ConvexPotential(kappa=1.0, beta=1.0)
    controls = McmcControls(burn_in=150, thinning=9)
    batch = sample_massive_batch(grid, V, 0.7, controls, 21, [0, 1, 2])
    for i, idx in enumerate([0, 1, 2]):
        solo = sample_massive_field(grid, V, 0.7, controls, 21, idx)
        assert np.array_equal(batch[i].phi, solo.phi), idx


def test_mala_marginal_variance_tracks_gaussian():
    """Short Gaussian chains already sit near the exact marginal variance."""
    from hlab.lattice import constant_coeff_green

    grid = TorusGrid(1, 16)
    m = 1.0
    controls = McmcControls(burn_in=400, thinning=32)
    samples = sample_massive_batch(grid, ConvexPotential(0.0), m, controls, 99, list(range(64)))
    phis = np.stack([s.phi for s in samples])
    var = phis.var()
    want = constant_coeff_green(m**2, grid)[0]
    # 64 draws x 16 sites, crude z-test with a generous band
    assert abs(var - want) < 0.25 * want


def test_moment_bound_check_gaussian_equality_case():
    """For the Gaussian measure the variance bound is attained, never exceeded."""
    rng = sample_stream(1234, 0)
    grid = TorusGrid(1, 32)
    m = 0.8
    # direct spectral draws of the Gaussian field, no chains involved
    from hlab.lattice import dft, idft, laplacian_symbol

    n = 512
    spec = 1.0 / (m**2 + laplacian_symbol(grid))
    phis = np.empty((n,) + grid.shape)
    for i in range(n):
        white = rng.standard_normal(grid.shape)
        phis[i] = np.real(idft(grid, dft(grid, white) * np.sqrt(spec)))
    f = 0.2 * rng.standard_normal(grid.shape)
    out = moment_bound_check(grid, phis, f, 1.0, m)
    assert out["holds_within_3se"]
    # equality case: the bound is the exact moment generating function
    assert abs(out["empirical"] - out["bound"]) <= 4.0 * out["se"]


def test_default_proxy_mass_decays_with_side():
    assert default_proxy_mass(TorusGrid(2, 16)) < default_proxy_mass(TorusGrid(2, 8))
    assert default_proxy_mass(TorusGrid(2, 64)) > 0.0
