"""Kernel tables: averaging, homogenized references, cutoffs, decay fits."""

import numpy as np
import pytest

from hlab.environments import bernoulli_environment, constant_environment
from hlab.greens import (
    DECAY_CLAIMS,
    CutoffSpec,
    GreensTable,
    averaged_green,
    cutoff_smooth,
    cutoff_spectrum,
    decay_fit,
    difference_tables,
    flip,
    homogenized_doubling_drift,
    homogenized_green,
    lattice_cutoff_kernel,
    mixed_second_difference,
    source_sites,
    table_magnitude,
)
from hlab.lattice import TorusGrid, constant_coeff_green


def test_source_sites_layout():
    grid = TorusGrid(2, 16)
    sites = source_sites(grid, 16)
    assert len(sites) == 16
    assert len(set(sites)) == 16
    assert all(len(s) == 2 and 0 <= c < 16 for s in sites for c in s)
    assert source_sites(TorusGrid(1, 8), 4) == [(0,), (2,), (4,), (6,)]


def test_flip_is_an_involution_fixing_the_origin():
    rng = np.random.default_rng(61)
    grid = TorusGrid(2, 8)
    f = rng.standard_normal(grid.shape)
    assert np.array_equal(flip(grid, flip(grid, f)), f)
    delta = np.zeros(grid.shape)
    delta[0, 0] = 1.0
    assert np.array_equal(flip(grid, delta), delta)
    shifted = np.roll(delta, (1, 2), axis=(0, 1))  # delta at (1, 2)
    assert flip(grid, shifted)[-1, -2] == 1.0


def test_flip_symmetry_of_constant_kernel():
    grid = TorusGrid(2, 16)
    g = constant_coeff_green(0.3, grid)
    assert np.max(np.abs(g - flip(grid, g))) < 1e-15


def test_mixed_second_difference_hand_case():
    grid = TorusGrid(1, 4)
    f = np.array([0.0, 1.0, 4.0, 9.0])
    out = mixed_second_difference(grid, f)
    # D D f(x) = f(x+2) - 2 f(x+1) + f(x)
    want = np.array([2.0, 2.0, -14.0, 10.0])
    assert np.allclose(out[0, 0], want)


def test_averaged_green_constant_environment_exact():
    env = constant_environment(1.0)
    grid = TorusGrid(2, 12)
    eta = 0.2
    res = averaged_green(env, grid, eta, n_samples=3, n_sources=4)
    want = constant_coeff_green(eta, grid)
    assert np.max(np.abs(res.value.values - want)) < 1e-9
    # identical coefficient draws: spread across samples is pure solver noise
    assert np.max(res.value.stderr) < 1e-6
    assert np.max(np.abs(res.asymmetry.values)) < 1e-9
    assert res.n_dropped == 0
    assert res.value.n_samples == 3


def test_averaged_green_matches_flipped_draw_statistics():
    """Random draws break per-sample symmetry but the tables stay finite and consistent."""
    env = bernoulli_environment(0.5)
    grid = TorusGrid(2, 8)
    res = averaged_green(env, grid, 0.5, n_samples=4, n_sources=4, master_seed=3)
    g = res.value.values
    assert g[0, 0] > 0
    assert np.all(np.isfinite(g))
    assert res.gradient.values.shape == (2,) + grid.shape
    assert res.second.values.shape == (2, 2) + grid.shape


def test_homogenized_green_identity_matrix_is_constant_kernel():
    grid = TorusGrid(2, 16)
    table = homogenized_green(np.eye(2), 0.4, grid)
    want = constant_coeff_green(0.4, grid)
    assert np.max(np.abs(table.values - want)) < 1e-12
    assert table.kind == "homogenized"


def test_homogenized_green_input_validation():
    grid = TorusGrid(2, 8)
    with pytest.raises(ValueError):
        homogenized_green(np.array([[1.0, 0.5], [0.0, 1.0]]), 0.1, grid)  # not Hermitian
    with pytest.raises(ValueError):
        homogenized_green(-np.eye(2), 0.1, grid)  # not positive definite
    with pytest.raises(ValueError):
        homogenized_green(np.eye(2), 0.0, grid)


def test_difference_tables_structure():
    env = constant_environment(1.0)
    grid = TorusGrid(2, 8)
    res = averaged_green(env, grid, 0.3, n_samples=2, n_sources=4)
    hom = homogenized_green(np.eye(2), 0.3, grid)
    diffs = difference_tables(res, hom)
    assert set(diffs) == {"difference", "gradient_difference", "second_difference"}
    # constant a = I makes averaged == homogenized to solver accuracy
    assert np.max(np.abs(diffs["difference"].values)) < 1e-9
    assert diffs["difference"].stderr is res.value.stderr


def test_homogenized_doubling_drift_shrinks_with_mass():
    grid = TorusGrid(2, 16)
    drift_small = homogenized_doubling_drift(np.eye(2), 0.1, grid)
    drift_large = homogenized_doubling_drift(np.eye(2), 1.0, grid)
    assert drift_large < drift_small < 0.1
    assert drift_large < 1e-3


def test_cutoff_spec_validation():
    with pytest.raises(ValueError):
        CutoffSpec(0.5)
    grid = TorusGrid(2, 16)
    with pytest.raises(ValueError):
        # scale beyond L/4 cannot fit the fit window
        table = GreensTable(grid, 0.1, "homogenized", constant_coeff_green(0.1, grid))
        cutoff_smooth(table, CutoffSpec(8))


def test_cutoff_kernel_mass():
    grid = TorusGrid(2, 32)
    kernel, defect = lattice_cutoff_kernel(grid, CutoffSpec(8))
    assert abs(kernel.sum() - 1.0) < 1e-14  # renormalized on the lattice
    assert defect < 5.0 / 8.0
    r = grid.radius()
    assert np.max(np.abs(kernel[r > 8.0])) == 0.0


def test_cutoff_smooth_exact_decomposition():
    grid = TorusGrid(2, 32)
    table = GreensTable(grid, 0.2, "homogenized", constant_coeff_green(0.2, grid))
    smoothed, remainder, info = cutoff_smooth(table, CutoffSpec(4))
    assert np.array_equal(smoothed.values + remainder.values, table.values)
    assert info["mass_defect"] < 5.0 / 4.0
    # smoothing a slowly varying kernel barely moves it near the origin
    assert abs(smoothed.values[0, 0] - table.values[0, 0]) < table.values[0, 0]


def test_cutoff_spectrum_normalization():
    grid = TorusGrid(2, 32)
    spec = cutoff_spectrum(grid, CutoffSpec(4))
    assert abs(spec.ravel()[0] - 1.0) < 1e-12  # unit mass at zero frequency
    assert np.max(np.abs(spec)) < 1.0 + 1e-12


def test_table_magnitude_matrix_spectral_norm():
    grid = TorusGrid(1, 4)
    vals = np.zeros((1, 1, 4))
    vals[0, 0] = [1.0, -2.0, 3.0, -4.0]
    t = GreensTable(grid, 0.1, "second_difference", vals)
    mag, sig = table_magnitude(t)
    assert np.allclose(mag, [1.0, 2.0, 3.0, 4.0])
    assert np.allclose(sig, 0.0)


def test_decay_claims_exponents():
    assert DECAY_CLAIMS["value"][0](3) == 1
    assert DECAY_CLAIMS["gradient"][0](3) == 2
    assert DECAY_CLAIMS["difference"][1] is True
    assert DECAY_CLAIMS["value"][1] is False
    assert DECAY_CLAIMS["second_difference"][0](2) == 2


def synthetic_tables(grid, C, p, gamma, Lam, etas):
    r = grid.radius()
    tables = []
    for eta in etas:
        rate = gamma * np.sqrt(eta / Lam)
        vals = C * (r + 1.0) ** (-p) * np.exp(-rate * r)
        tables.append(GreensTable(grid, eta, "value", vals))
    return tables


def test_decay_fit_recovers_planted_law():
    """Noise-free power law with mass factor: exact recovery of p, gamma, C."""
    grid = TorusGrid(2, 32)
    tables = synthetic_tables(grid, C=2.0, p=3.0, gamma=0.5, Lam=1.5, etas=[0.04, 0.16, 0.64])
    rep = decay_fit(tables, "value", 1.5, n_boot=100)
    assert abs(rep.p_hat - 3.0) < 1e-9
    assert abs(rep.gamma_hat - 0.5) < 1e-9
    assert abs(rep.C_hat - 2.0) < 1e-9
    assert rep.p_se < 1e-9
    assert not rep.insufficient_signal
    assert not rep.window["eta_count_below_3"]


def test_decay_fit_alpha_claims():
    """difference-type claims report the exponent excess over the base."""
    grid = TorusGrid(2, 32)
    tables = synthetic_tables(grid, C=1.0, p=0.75, gamma=0.3, Lam=1.0, etas=[0.05, 0.2])
    rep = decay_fit(tables, "difference", 1.0, n_boot=100)
    assert rep.base_exponent == 0.0
    assert rep.has_alpha
    assert abs(rep.alpha_hat - 0.75) < 1e-9
    assert rep.alpha_lower95 > 0.5
    assert rep.window["eta_count_below_3"]


def test_decay_fit_flags_noise_floor():
    """Tables sitting under their own error bars are declared insufficient."""
    grid = TorusGrid(2, 16)
    r = grid.radius()
    vals = 1e-8 * (r + 1.0) ** (-2.0)
    big_err = np.full(grid.shape, 1.0)
    t = GreensTable(grid, 0.1, "value", vals, stderr=big_err, n_samples=4)
    rep = decay_fit([t], "value", 1.0, n_boot=10)
    assert rep.insufficient_signal
    assert rep.p_hat is None


def test_decay_fit_rejects_unknown_claim():
    grid = TorusGrid(2, 16)
    t = GreensTable(grid, 0.1, "value", np.ones(grid.shape))
    with pytest.raises(ValueError):
        decay_fit([t], "third_moment", 1.0)
