"""CG elliptic solves, the resolvent map T, and both corrector routes."""

import numpy as np
import pytest

from hlab.environments import (
    CoefficientField,
    EllipticityBounds,
    bernoulli_environment,
    constant_environment,
)
from hlab.lattice import (
    TorusGrid,
    adjoint_gradient,
    constant_coeff_green,
    dft,
    forward_gradient,
    idft,
    laplacian_symbol,
    twisted_gradient,
)
from hlab.solver import (
    MaxIterationsError,
    NonConvergenceError,
    NotSPDError,
    SolveControls,
    antiderivative_twisted,
    apply_T,
    energy_identity_defect,
    project_zero_mean,
    solve_corrector_direct,
    solve_corrector_neumann,
    solve_elliptic,
)

from oracles import q_1d_bordered, twisted_difference_matrix


def test_controls_validation():
    with pytest.raises(ValueError):
        SolveControls(rel_tolerance=0.0)
    with pytest.raises(ValueError):
        SolveControls(max_iterations=0)
    with pytest.raises(ValueError):
        SolveControls(preconditioner="jacobi")


def test_project_zero_mean():
    rng = np.random.default_rng(41)
    grid = TorusGrid(2, 6)
    f = rng.standard_normal((3,) + grid.shape)
    p = project_zero_mean(grid, f)
    assert np.max(np.abs(p.mean(axis=(1, 2)))) < 1e-14
    assert np.allclose(project_zero_mean(grid, p), p)


def test_solve_elliptic_constant_coefficients_is_spectral():
    rng = np.random.default_rng(42)
    grid = TorusGrid(2, 12)
    env = constant_environment(1.0)
    a = env.draw(grid, 0, 0)
    eta = 0.4
    h = rng.standard_normal(grid.shape)
    sol = solve_elliptic(a, eta, h)
    want = idft(grid, dft(grid, h.astype(np.complex128)) / (eta + laplacian_symbol(grid))).real
    assert np.max(np.abs(sol.values - want)) < 1e-9


def test_solve_elliptic_random_coefficients_residual():
    """The returned solution satisfies the defining equation, recomputed here."""
    rng = np.random.default_rng(43)
    grid = TorusGrid(2, 16)
    env = bernoulli_environment(0.5)
    a = env.draw(grid, 9, 0)
    eta = 0.25
    h = rng.standard_normal(grid.shape)
    sol = solve_elliptic(a, eta, h)
    g = forward_gradient(grid, sol.values)
    flux = np.einsum("jk...,k...->j...", a.a, g)
    applied = eta * sol.values + adjoint_gradient(grid, flux)
    rel = np.linalg.norm(applied - h) / np.linalg.norm(h)
    assert rel < 1e-9
    assert energy_identity_defect(a, eta, sol.values, h) < 1e-9


def test_solve_elliptic_rejects_bad_inputs():
    grid = TorusGrid(1, 8)
    a = constant_environment(1.0).draw(grid, 0, 0)
    with pytest.raises(ValueError):
        solve_elliptic(a, 0.0, np.zeros(8))
    with pytest.raises(ValueError):
        solve_elliptic(a, 1.0, np.zeros(9))


def test_solver_detects_indefinite_operator():
    grid = TorusGrid(1, 16)
    a_neg = np.zeros((1, 1, 16))
    a_neg[0, 0] = -1.0
    bad = CoefficientField(grid=grid, a=a_neg, bounds=EllipticityBounds(0.5, 1.5))
    rng = np.random.default_rng(44)
    with pytest.raises(NotSPDError):
        solve_elliptic(bad, 0.1, rng.standard_normal(16))


def test_solver_max_iterations():
    grid = TorusGrid(2, 16)
    a = bernoulli_environment(0.5).draw(grid, 1, 0)
    rng = np.random.default_rng(45)
    controls = SolveControls(rel_tolerance=1e-12, max_iterations=2)
    with pytest.raises(MaxIterationsError):
        solve_elliptic(a, 1e-4, rng.standard_normal(grid.shape), controls)


def test_apply_T_is_a_contraction():
    rng = np.random.default_rng(46)
    grid = TorusGrid(2, 8)
    for _ in range(20):
        xi = rng.uniform(-np.pi, np.pi, 2)
        eta = 10.0 ** rng.uniform(-4, 0)
        g = rng.standard_normal((2,) + grid.shape) + 1j * rng.standard_normal((2,) + grid.shape)
        Tg = apply_T(grid, g, xi, eta, 1.5)
        assert np.linalg.norm(Tg) <= np.linalg.norm(g) * (1.0 + 1e-13)


def test_apply_T_is_self_adjoint():
    rng = np.random.default_rng(47)
    grid = TorusGrid(2, 6)
    xi = np.array([0.4, -0.9])
    g = rng.standard_normal((2,) + grid.shape) + 1j * rng.standard_normal((2,) + grid.shape)
    h = rng.standard_normal((2,) + grid.shape) + 1j * rng.standard_normal((2,) + grid.shape)
    lhs = np.vdot(apply_T(grid, g, xi, 0.3, 1.2), h)
    rhs = np.vdot(g, apply_T(grid, h, xi, 0.3, 1.2))
    assert abs(lhs - rhs) < 1e-11 * max(1.0, abs(lhs))


def test_apply_T_constant_input_formula():
    grid = TorusGrid(2, 8)
    xi = np.array([0.7, 0.2])
    eta, Lam = 0.2, 1.5
    v = np.array([1.0 + 0.5j, -2.0])
    g = np.broadcast_to(v[:, None, None], (2,) + grid.shape).copy()
    out = apply_T(grid, g, xi, eta, Lam)
    e = np.exp(-1j * xi) - 1.0
    want = e * np.vdot(e, v) / (eta / Lam + np.sum(np.abs(e) ** 2))
    assert np.max(np.abs(out - want[:, None, None])) < 1e-12


def test_corrector_vanishes_for_constant_coefficients():
    """Constant coefficients carry no correction; the flux average is exact.

    The right side of the corrector equation is pure rounding noise here, so
    the relative residual is not informative; the solution itself is.
    """
    grid = TorusGrid(2, 8)
    a = constant_environment(2.0).draw(grid, 0, 0)
    sol = solve_corrector_direct(a, np.array([0.3, 0.1]), 0.05)
    assert np.max(np.abs(sol.phi)) < 1e-12
    from hlab.effective import q_from_corrector

    q = q_from_corrector(a.a, sol)
    assert np.max(np.abs(q - 2.0 * np.eye(2))) < 1e-12


def test_corrector_matches_dense_bordered_system():
    """CG corrector column against a dense solve of the same equations (d = 1)."""
    grid = TorusGrid(1, 32)
    env = bernoulli_environment(0.5)
    a = env.draw(grid, 13, 2)
    a_line = a.a[0, 0]
    for xi, eta in [(0.0, 0.5), (0.9, 0.05), (-2.0, 1e-3)]:
        sol = solve_corrector_direct(a, np.array([xi]), eta)
        L = grid.side
        D = twisted_difference_matrix(L, xi)
        A = D.conj().T @ np.diag(a_line) @ D
        M = np.zeros((L + 1, L + 1), dtype=np.complex128)
        M[:L, :L] = eta * np.eye(L) + A
        M[:L, L] = -1.0
        M[L, :L] = 1.0 / L
        rhs = np.zeros(L + 1, dtype=np.complex128)
        rhs[:L] = -(D.conj().T @ a_line)
        phi_dense = np.linalg.solve(M, rhs)[:L]
        assert np.max(np.abs(sol.phi[0] - phi_dense)) < 1e-8, (xi, eta)


def test_corrector_routes_agree():
    """Fixed-point series and CG reach the same corrector gradient."""
    grid = TorusGrid(2, 8)
    env = bernoulli_environment(0.4)
    a = env.draw(grid, 3, 1)
    xi = np.array([0.5, -0.3])
    eta = 0.1
    direct = solve_corrector_direct(a, xi, eta)
    series, diag = solve_corrector_neumann(a, xi, eta)
    gap = np.max(np.abs(direct.grad_phi - series.grad_phi))
    assert gap < 1e-7
    assert series.residual < 1e-6
    assert diag["fitted_ratio"] <= diag["contraction_bound"] + 0.05
    assert diag["converged"]


def test_neumann_diverges_when_bounds_are_wrong():
    """Claiming Lambda below the true sup breaks the contraction, loudly."""
    rng = np.random.default_rng(49)
    grid = TorusGrid(1, 16)
    a_big = np.zeros((1, 1, 16))
    a_big[0, 0] = rng.choice([1.5, 4.5], size=16)
    lying = CoefficientField(grid=grid, a=a_big, bounds=EllipticityBounds(0.5, 1.0))
    with pytest.raises(NonConvergenceError):
        solve_corrector_neumann(lying, np.array([0.4]), 0.01)


def test_antiderivative_twisted_inverts_gradient():
    rng = np.random.default_rng(48)
    grid = TorusGrid(2, 8)
    xi = np.array([0.6, 1.3])
    phi = project_zero_mean(
        grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    )
    v = twisted_gradient(grid, phi, xi)
    back = antiderivative_twisted(grid, v, xi)
    assert np.max(np.abs(back - phi)) < 1e-11


def test_effective_symbol_oracle_d1():
    """Flux average from the CG corrector equals the dense-system value."""
    grid = TorusGrid(1, 48)
    env = bernoulli_environment(0.5)
    a = env.draw(grid, 29, 0)
    a_line = a.a[0, 0]
    from hlab.effective import q_from_corrector

    for xi, eta in [(0.0, 0.2), (1.1, 0.01)]:
        sol = solve_corrector_direct(a, np.array([xi]), eta)
        q = q_from_corrector(a.a, sol)
        want = q_1d_bordered(a_line, xi, eta)
        assert abs(q[0, 0] - want) < 1e-9, (xi, eta)
