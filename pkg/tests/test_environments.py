"""Coefficient field sampling, ellipticity bookkeeping, config validation."""

import numpy as np
import pytest

from hlab.environments import (
    CoefficientField,
    EllipticityBounds,
    bernoulli_environment,
    coeff_from_gradient,
    coeff_from_phi,
    make_coefficient_map,
    make_environment,
)
from hlab.fieldtheory import ConvexPotential, sample_gradient_iid_1d
from hlab.lattice import TorusGrid
from hlab.rng import sample_stream


def test_bounds_validation():
    with pytest.raises(ValueError):
        EllipticityBounds(lam=0.0, Lam=1.0)
    with pytest.raises(ValueError):
        EllipticityBounds(lam=2.0, Lam=1.0)
    b = EllipticityBounds(lam=0.5, Lam=1.5)
    assert b.contrast == 3.0


def test_bernoulli_values_and_frequencies():
    env = bernoulli_environment(0.5)
    grid = TorusGrid(2, 32)
    field = env.draw(grid, 100, 0)
    diag = field.a[0, 0]
    assert set(np.unique(diag)) == {0.5, 1.5}
    assert np.array_equal(field.a[1, 1], diag)
    assert np.max(np.abs(field.a[0, 1])) == 0.0
    # fair coin per site
    frac = np.mean(diag == 1.5)
    n = grid.n_sites
    assert abs(frac - 0.5) < 4.0 * np.sqrt(0.25 / n)
    field.check_bounds()
    assert field.symmetry_defect() == 0.0


def test_draws_are_reproducible_and_distinct():
    env = bernoulli_environment(0.3)
    grid = TorusGrid(1, 64)
    a0 = env.draw(grid, 7, 0).a
    a0_again = env.draw(grid, 7, 0).a
    a1 = env.draw(grid, 7, 1).a
    assert np.array_equal(a0, a0_again)
    assert not np.array_equal(a0, a1)


def test_iid_uniform_respects_declared_bounds():
    env = make_environment(
        {
            "kind": "iid_general",
            "distribution": {"type": "uniform_isotropic", "low": 0.25, "high": 2.0},
        }
    )
    grid = TorusGrid(2, 16)
    field = env.draw(grid, 3, 4)
    ev = field.sitewise_eigenvalues()
    assert ev.min() >= 0.25 - 1e-12
    assert ev.max() <= 2.0 + 1e-12
    assert env.bounds.lam == 0.25 and env.bounds.Lam == 2.0


def test_check_bounds_catches_violations():
    grid = TorusGrid(1, 4)
    a = np.ones((1, 1, 4))
    a[0, 0, 2] = 0.05
    field = CoefficientField(grid=grid, a=a, bounds=EllipticityBounds(0.5, 1.5))
    with pytest.raises(ValueError):
        field.check_bounds()


def test_tanh_map_saturates_inside_declared_bounds():
    cmap = make_coefficient_map("tanh_isotropic", "scalar", base=1.0, amp=0.5, rate=2.0)
    grid = TorusGrid(1, 8)
    extreme = np.array([-1e6, -3.0, -0.1, 0.0, 0.1, 1.0, 3.0, 1e6], dtype=float)
    a = cmap.apply(grid, extreme)
    diag = a[0, 0]
    assert diag.min() >= cmap.bounds.lam - 1e-12
    assert diag.max() <= cmap.bounds.Lam + 1e-12
    # monotone in the input, so the extremes sit at the declared edges
    assert abs(diag[0] - cmap.bounds.lam) < 1e-9
    assert abs(diag[-1] - cmap.bounds.Lam) < 1e-9


def test_constant_map():
    cmap = make_coefficient_map("constant_isotropic", "scalar", c=1.25)
    grid = TorusGrid(2, 4)
    a = cmap.apply(grid, np.zeros(grid.shape))
    assert np.allclose(a[0, 0], 1.25)
    assert np.allclose(a[0, 1], 0.0)
    assert cmap.bounds.lam == cmap.bounds.Lam == 1.25


def test_coeff_from_phi_requires_scalar_input_kind():
    grid = TorusGrid(1, 16)
    sample = sample_gradient_iid_1d(grid, ConvexPotential(kappa=0.0), 1, 0)
    vec_map = make_coefficient_map("tanh_isotropic", "vector", base=1.0, amp=0.25, rate=1.0)
    with pytest.raises(ValueError):
        coeff_from_phi(sample, vec_map)  # no scalar field on a gradient sample
    field = coeff_from_gradient(sample, vec_map)
    field.check_bounds()


def test_make_environment_error_paths():
    with pytest.raises(ValueError, match="environment.kind"):
        make_environment({"kind": "nope"})
    with pytest.raises(ValueError, match="environment.gamma"):
        make_environment({"kind": "bernoulli", "gamma": 1.5})
    with pytest.raises(ValueError, match="coefficient_map"):
        make_environment(
            {"kind": "massive_field", "mass": 1.0, "potential": {"kappa": 0.0}}
        )
    with pytest.raises(ValueError, match="environment.mass"):
        make_environment(
            {
                "kind": "massive_field",
                "mass": -1.0,
                "potential": {"kappa": 0.0},
                "coefficient_map": {"name": "tanh_isotropic", "base": 1.0, "amp": 0.5, "rate": 1.0},
            }
        )


def test_provenance_records_draw_identity():
    env = bernoulli_environment(0.5)
    field = env.draw(TorusGrid(1, 8), 42, 3)
    assert field.provenance["master_seed"] == 42
    assert field.provenance["sample_index"] == 3
    assert field.provenance["kind"] == "bernoulli"
