"""Built-in verification battery.

Each check is a self-contained experiment at a fixed scale with fixed seeds:
it draws its own environments, runs the relevant pipeline, applies a stated
tolerance, and returns a pass/fail verdict together with deterministic
artifact bytes.  The final check reruns the battery at a different worker
count and compares artifacts byte for byte, which is what makes the "same
seed, same bytes, any thread count" guarantee an enforced property rather
than an aspiration.

The one-dimensional dense-solve oracle lives here so the battery is
independent of the iterative solver it certifies: series resistors in one
dimension are exactly solvable, and the dense route shares no code with the
preconditioned CG path.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .effective import (
    extrapolate_q00,
    holder_scan_from_samples,
    q_of_xi_eta,
    q_via_series,
)
from .environments import (
    bernoulli_environment,
    coeff_from_gradient,
    constant_environment,
    make_coefficient_map,
)
from .fieldtheory import (
    ConvexPotential,
    McmcControls,
    moment_bound_check,
    sample_gradient_iid_1d,
    sample_massive_batch,
)
from .greens import (
    CutoffSpec,
    GreensTable,
    averaged_green,
    cutoff_smooth,
    decay_fit,
    difference_tables,
    homogenized_green,
    lattice_cutoff_kernel,
)
from .lattice import TorusGrid, constant_coeff_green, gradient_symbol
from .rng import substream
from .solver import SolveControls, apply_T, solve_elliptic

_SEED = {n: 0xC0FFEE00 + n for n in range(1, 13)}

# cross-check cache, keyed by (tag..., threads); reruns at a different
# thread count recompute from scratch, which is exactly what check 12 needs
_shared: dict = {}


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0
    artifacts: dict = field(default_factory=dict)


def _to_plain(obj):
    if isinstance(obj, dict):
        return {str(k): _to_plain(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _json_bytes(obj) -> bytes:
    return json.dumps(_to_plain(obj), sort_keys=True, separators=(",", ":")).encode()


# ---------------------------------------------------------------------------
# exact one-dimensional oracle (dense route, no CG, no FFT)


def exact_q_1d_dense(a_line: np.ndarray, xi: float, eta: float) -> complex:
    """q(xi, eta) for one d=1 coefficient sample by a dense direct solve.

    Solves the corrector equation with a zero-mean Lagrange multiplier:

        eta Phi + grad_xi^* ( a (grad_xi Phi + 1) ) - mu 1 = 0,   mean Phi = 0

    as one (L+1) x (L+1) complex linear system, then evaluates the flux
    average q = mean_x a(x) ((grad_xi Phi)(x) + 1).  At xi = 0 and eta -> 0
    the flux is constant and q is the harmonic mean of a (series resistors).
    """
    a_line = np.asarray(a_line, dtype=np.float64)
    L = a_line.size
    am = np.roll(a_line, 1)  # a(x-1)
    phase_p = np.exp(1j * xi)
    phase_m = np.exp(-1j * xi)
    idx = np.arange(L)
    A = np.zeros((L + 1, L + 1), dtype=np.complex128)
    A[idx, idx] = eta + am + a_line
    np.add.at(A, (idx, (idx - 1) % L), -phase_p * am)
    np.add.at(A, (idx, (idx + 1) % L), -phase_m * a_line)
    A[idx, L] = -1.0
    A[L, idx] = 1.0 / L
    rhs = np.zeros(L + 1, dtype=np.complex128)
    rhs[:L] = -(phase_p * am - a_line)
    sol = np.linalg.solve(A, rhs)
    phi = sol[:L]
    grad = phase_m * np.roll(phi, -1) - phi
    return complex(np.mean(a_line * (grad + 1.0)))


# ---------------------------------------------------------------------------
# criterion 1: d=1 extrapolated q(0,0) against the series-resistor value


def check_1(threads: int = 1) -> CheckResult:
    t0 = time.perf_counter()
    seed = _SEED[1]
    gamma = 0.5
    env = bernoulli_environment(gamma)
    grid = TorusGrid(1, 4096)
    ladder = [1e-2, 1e-3, 1e-4]
    n_samples = 64
    controls = SolveControls(rel_tolerance=1e-10)

    sym = extrapolate_q00(env, grid, ladder, n_samples, controls, seed, threads=threads)
    q00 = float(sym.q[0, 0].real)

    # oracle: per-sample harmonic mean over the same environments
    hms = np.empty(n_samples)
    for i in range(n_samples):
        a = env.draw(grid, seed, i).a[0, 0]
        hms[i] = 1.0 / np.mean(1.0 / a)
    oracle = float(hms.mean())
    rel = abs(q00 - oracle) / oracle
    # the dense corrector at tiny eta reproduces the harmonic mean; spot-check
    a0 = env.draw(grid, seed, 0).a[0, 0]
    dense = exact_q_1d_dense(a0, 0.0, 1e-9).real
    dense_dev = abs(dense - 1.0 / np.mean(1.0 / a0))

    passed = rel <= 0.02 and dense_dev <= 1e-6
    detail = (
        f"extrapolated q00 = {q00:.6f}, series-resistor oracle = {oracle:.6f} "
        f"(analytic 1-gamma^2 = {1 - gamma**2}), rel dev {rel:.2e} (<= 2e-2), "
        f"dense-vs-harmonic spot dev {dense_dev:.2e}"
    )
    artifacts = {
        "c1_ladder.json": _json_bytes(
            {
                "eta_ladder": ladder,
                "ladder_values": sym.diagnostics["ladder_values"],
                "extrapolated": q00,
                "oracle": oracle,
                "spread": sym.diagnostics["extrapolation_spread"],
            }
        ),
        "c1_harmonic_means.f64": hms.tobytes(),
    }
    return CheckResult(1, "1-d homogenization oracle", passed, detail,
                       time.perf_counter() - t0, artifacts)


# ---------------------------------------------------------------------------
# criterion 2: constant coefficients reproduce cI and the exact kernel


def check_2(threads: int = 1) -> CheckResult:
    t0 = time.perf_counter()
    seed = _SEED[2]
    controls = SolveControls(rel_tolerance=1e-12)
    worst_q = 0.0
    worst_green = 0.0
    blobs = {}
    for c in (0.5, 1.0, 2.0):
        env = constant_environment(c)
        for d in (1, 2):
            grid = TorusGrid(d, 32)
            xi = np.full(d, 0.7)
            sym = q_of_xi_eta(env, grid, xi, 0.3, 2, controls, seed, threads=threads)
            dev_q = float(np.max(np.abs(sym.q - c * np.eye(d))))
            worst_q = max(worst_q, dev_q)

            eta = 0.3
            avg = averaged_green(env, grid, eta, 2, controls, seed,
                                 n_sources=2, threads=threads)
            exact = constant_coeff_green(eta / c, grid) / c
            dev_g = float(np.max(np.abs(avg.value.values - exact)))
            worst_green = max(worst_green, dev_g)
            blobs[f"c2_green_c{c}_d{d}.f64"] = avg.value.values.tobytes()
    passed = worst_q <= 1e-10 and worst_green <= 1e-8
    detail = (
        f"max |q - cI| = {worst_q:.2e} (<= 1e-10), "
        f"max |averaged - exact kernel| = {worst_green:.2e} (<= 1e-8, solver tol)"
    )
    return CheckResult(2, "constant-coefficient exactness", passed, detail,
                       time.perf_counter() - t0, blobs)


# ---------------------------------------------------------------------------
# criteria 3 and 4 share one (xi, eta) grid of Bernoulli symbol estimates

_C3_GAMMA = 0.5
_C3_SIDE = 32
_C3_SAMPLES = 32
_C3_ETAS = (0.05, 0.2, 0.8)


def _c3_xi_points() -> list[np.ndarray]:
    axis = np.linspace(-2.4, 2.4, 5)
    return [np.array([x1, x2]) for x1 in axis for x2 in axis]


def _c3_grid(threads: int) -> list[dict]:
    key = ("c3", threads)
    if key in _shared:
        return _shared[key]
    env = bernoulli_environment(_C3_GAMMA)
    grid = TorusGrid(2, _C3_SIDE)
    controls = SolveControls(rel_tolerance=1e-10)
    out = []
    for xi in _c3_xi_points():
        for eta in _C3_ETAS:
            sym = q_of_xi_eta(
                env, grid, xi, eta, _C3_SAMPLES, controls, _SEED[3], threads=threads
            )
            out.append({"xi": xi, "eta": eta, "direct": sym})
    _shared[key] = out
    return out


def check_3(threads: int = 1) -> CheckResult:
    t0 = time.perf_counter()
    points = _c3_grid(threads)
    lo_bound, hi_bound = 1.0 - _C3_GAMMA, 1.0 + _C3_GAMMA
    worst_lo = np.inf
    worst_hi = -np.inf
    violations = 0
    rows = []
    for p in points:
        sym = p["direct"]
        lo, hi = sym.rayleigh_range()
        slack = 3.0 * sym.stderr_scale()
        if lo < lo_bound - slack - 1e-12 or hi > hi_bound + slack + 1e-12:
            violations += 1
        worst_lo = min(worst_lo, lo)
        worst_hi = max(worst_hi, hi)
        rows.append(
            {"xi": p["xi"], "eta": p["eta"], "q": sym.q, "stderr": sym.stderr,
             "rayleigh": [lo, hi]}
        )
    passed = violations == 0
    detail = (
        f"{len(points)} grid points: Rayleigh range [{worst_lo:.4f}, {worst_hi:.4f}] "
        f"vs bounds [{lo_bound}, {hi_bound}] within 3 stderr; {violations} violations"
    )
    artifacts = {"c3_symbols.json": _json_bytes(rows)}
    return CheckResult(3, "symbol ellipticity bounds", passed, detail,
                       time.perf_counter() - t0, artifacts)


def check_4(threads: int = 1) -> CheckResult:
    t0 = time.perf_counter()
    points = _c3_grid(threads)
    env = bernoulli_environment(_C3_GAMMA)
    grid = TorusGrid(2, _C3_SIDE)
    controls = SolveControls(rel_tolerance=1e-10)
    ratio_cap = (1.0 - env.bounds.lam / env.bounds.Lam) + 0.05
    worst_gap = 0.0
    worst_ratio = 0.0
    violations = 0
    rows = []
    for p in points:
        sym_s = q_via_series(
            env, grid, p["xi"], p["eta"], 200, _C3_SAMPLES, controls, _SEED[3],
            threads=threads,
        )
        sym_d = p["direct"]
        gap = float(np.linalg.norm(sym_s.q - sym_d.q, 2))
        se = float(np.hypot(sym_s.stderr_scale(), sym_d.stderr_scale()))
        albl = max(1e-6, 3.0 * se)
        if gap > albl:
            violations += 1
        worst_gap = max(worst_gap, gap)
        ratio = sym_s.diagnostics["fitted_ratio_max"]
        worst_ratio = max(worst_ratio, ratio)
        rows.append({"xi": p["xi"], "eta": p["eta"], "gap": gap, "allowed": albl,
                     "fitted_ratio_max": ratio})
    passed = violations == 0 and worst_ratio <= ratio_cap
    detail = (
        f"series vs direct: worst gap {worst_gap:.2e} over {len(points)} points "
        f"({violations} beyond max(1e-6, 3 se)); worst term ratio {worst_ratio:.4f} "
        f"<= {ratio_cap:.4f}"
    )
    artifacts = {"c4_agreement.json": _json_bytes(rows)}
    return CheckResult(4, "series vs direct cross-validation", passed, detail,
                       time.perf_counter() - t0, artifacts)


# ---------------------------------------------------------------------------
# criterion 5: T is a contraction; constant inputs map by the exact formula


def check_5(threads: int = 1) -> CheckResult:
    t0 = time.perf_counter()
    grid = TorusGrid(2, 16)
    Lam = 1.5
    rng = substream(_SEED[5], 0, 5)
    worst_excess = -np.inf
    worst_const = 0.0
    n_pairs, n_fields = 10, 10
    for _ in range(n_pairs):
        xi = rng.uniform(-np.pi, np.pi, size=2)
        eta = float(10.0 ** rng.uniform(-3, 0))
        for _ in range(n_fields):
            g = rng.standard_normal((2,) + grid.shape) + 1j * rng.standard_normal(
                (2,) + grid.shape
            )
            tg = apply_T(grid, g, xi, eta, Lam)
            excess = float(
                np.sqrt(np.sum(np.abs(tg) ** 2)) - np.sqrt(np.sum(np.abs(g) ** 2))
            )
            worst_excess = max(worst_excess, excess)
        # constant input: T v = e(xi) (e(xi)* . v) / (eta/Lam + |e(xi)|^2)
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        g_const = np.broadcast_to(v[:, None, None], (2,) + grid.shape).copy()
        tg = apply_T(grid, g_const, xi, eta, Lam)
        e = gradient_symbol(xi)
        expected = e * (np.vdot(e, v)) / (eta / Lam + np.sum(np.abs(e) ** 2))
        dev = float(np.max(np.abs(tg - expected[:, None, None])))
        worst_const = max(worst_const, dev)
    passed = worst_excess <= 1e-12 and worst_const <= 1e-12
    detail = (
        f"contraction: max ||Tg|| - ||g|| = {worst_excess:.2e} (<= 1e-12 over "
        f"{n_pairs * n_fields} fields); constant-input formula dev {worst_const:.2e}"
        f" (<= 1e-12)"
    )
    artifacts = {
        "c5_summary.json": _json_bytes(
            {"worst_excess": worst_excess, "worst_const": worst_const}
        )
    }
    return CheckResult(5, "operator contracts", passed, detail,
                       time.perf_counter() - t0, artifacts)


# ---------------------------------------------------------------------------
# criteria 6 and 7 share averaged-kernel batteries on one d=2 grid

_G_SIDE = 64
_G_SAMPLES = 100
_G_SOURCES = 16
_G_ETAS = (0.05, 0.1, 0.2)
# difference-table decay fits need a noise floor well under the kernel
# difference itself, which calls for more averaging than the positivity
# and symmetry table uses
_G7_SAMPLES = 800


def _green_table(threads: int, eta: float, n_samples: int = _G_SAMPLES):
    key = ("green", _G_SIDE, eta, n_samples, threads)
    if key in _shared:
        return _shared[key]
    env = bernoulli_environment(0.5)
    grid = TorusGrid(2, _G_SIDE)
    controls = SolveControls(rel_tolerance=1e-9)
    res = averaged_green(
        env, grid, eta, n_samples, controls, _SEED[6],
        n_sources=_G_SOURCES, threads=threads,
    )
    _shared[key] = res
    return res


def _t_tail(x: float, nu: int) -> float:
    """Upper tail P(T > x) of the Student-t distribution, x >= 0."""
    if x <= 0:
        return 0.5
    lc = (
        math.lgamma((nu + 1) / 2.0)
        - math.lgamma(nu / 2.0)
        - 0.5 * math.log(nu * math.pi)
    )
    t = np.linspace(x, x + 60.0, 120001)
    dens = np.exp(lc - 0.5 * (nu + 1) * np.log1p(t * t / nu))
    return float(np.trapezoid(dens, t))


def flip_consistency(asym: GreensTable) -> dict:
    """Family-wise flip-symmetry verdict for an asymmetry table.

    The averaged table satisfies g(x) = g(-x) in law, so each pair's
    standardized asymmetry mean/stderr is Student-t with n_samples - 1
    degrees of freedom under the null.  Testing thousands of pairs at a
    fixed 3-sigma cut must produce chance exceedances, and the pairs are
    spatially correlated, so counting exceedances against a binomial
    allowance is miscalibrated.  The verdict is a Bonferroni max test:
    symmetry is rejected only when the largest standardized asymmetry is
    too extreme for the number of pairs tested, at the 1% family-wise
    level.  Bonferroni stays conservative under arbitrary dependence,
    while a genuine asymmetry at any site grows like sqrt(n_samples) and
    fails decisively.  The 3-sigma exceedance count is reported alongside
    with its t-calibrated expectation, for reference only.
    """
    vals = np.abs(asym.values)
    err = asym.stderr
    live = err > 0
    z = np.zeros_like(vals)
    z[live] = vals[live] / err[live]
    # each unordered pair appears twice (at x and -x); self-paired sites
    # (x = -x mod L) have identically zero asymmetry and zero stderr
    n_live = int(live.sum())
    m_pairs = n_live // 2
    exceed = int((z[live] > 3.0).sum()) // 2
    nu = max(asym.n_samples - 1, 1)
    max_z = float(z.max())
    p_single = 2.0 * _t_tail(max_z, nu)
    p_family = min(m_pairs * p_single, 1.0)
    expected_exceed = m_pairs * 2.0 * _t_tail(3.0, nu)
    return {
        "n_pairs": m_pairs,
        "n_exceed_3sigma": exceed,
        "expected_exceed": float(expected_exceed),
        "max_z": max_z,
        "dof": nu,
        "p_family": float(p_family),
        "ok": p_family >= 0.01,
    }


def check_6(threads: int = 1) -> CheckResult:
    t0 = time.perf_counter()
    res = _green_table(threads, 0.1)
    val, err = res.value.values, res.value.stderr
    min_margin = float(np.min(val + 3.0 * err))
    positive = min_margin >= -1e-15
    flips = flip_consistency(res.asymmetry)
    passed = positive and flips["ok"] and res.n_dropped == 0
    detail = (
        f"min(value + 3 stderr) = {min_margin:.3e} (>= 0); flip symmetry: "
        f"max standardized asymmetry {flips['max_z']:.2f} over "
        f"{flips['n_pairs']} pairs, family-wise p = {flips['p_family']:.3f} "
        f"(reject below 0.01); {flips['n_exceed_3sigma']} pairs beyond 3 "
        f"sigma vs t-expected {flips['expected_exceed']:.1f}; "
        f"{res.n_dropped} dropped samples"
    )
    artifacts = {
        "c6_value.f64": val.tobytes(),
        "c6_stderr.f64": err.tobytes(),
        "c6_asym.f64": res.asymmetry.values.tobytes(),
        "c6_flips.json": _json_bytes(flips),
    }
    return CheckResult(6, "averaged-kernel positivity and flip symmetry", passed,
                       detail, time.perf_counter() - t0, artifacts)


def _q00_for_green(threads: int) -> np.ndarray:
    key = ("q00_green", threads)
    if key in _shared:
        return _shared[key]
    env = bernoulli_environment(0.5)
    grid = TorusGrid(2, _G_SIDE)
    controls = SolveControls(rel_tolerance=1e-9)
    sym = extrapolate_q00(
        env, grid, [1e-2, 3e-3, 1e-3], 128, controls, _SEED[7], threads=threads
    )
    q00 = 0.5 * (sym.q + sym.q.conj().T)
    _shared[key] = q00
    return q00


def check_7(threads: int = 1) -> CheckResult:
    t0 = time.perf_counter()
    grid = TorusGrid(2, _G_SIDE)
    q00 = _q00_for_green(threads)
    tables: dict[str, list[GreensTable]] = {
        "difference": [], "gradient_difference": [], "second_difference": []
    }
    for eta in _G_ETAS:
        avg = _green_table(threads, eta, _G7_SAMPLES)
        hom = homogenized_green(q00, eta, grid)
        diffs = difference_tables(avg, hom)
        for k in tables:
            tables[k].append(diffs[k])

    env = bernoulli_environment(0.5)
    reports = {
        k: decay_fit(tables[k], k, env.bounds.Lam, boot_seed=_SEED[7], n_boot=400)
        for k in tables
    }
    pd_, pg, ps = (reports[k] for k in
                   ("difference", "gradient_difference", "second_difference"))

    def ordered(hi, lo):
        if hi.p_hat is None or lo.p_hat is None:
            return False
        se = np.hypot(hi.p_se or 0.0, lo.p_se or 0.0)
        return (hi.p_hat - lo.p_hat) >= -1.645 * se

    ordering_ok = ordered(pg, pd_) and ordered(ps, pg)
    alpha_ok = (
        pd_.alpha_lower95 is not None and pd_.alpha_lower95 > 0.0
        and not pd_.insufficient_signal
    )
    passed = ordering_ok and alpha_ok
    detail = (
        f"fitted exponents: difference {None if pd_.p_hat is None else round(pd_.p_hat, 3)}"
        f" <= gradient {None if pg.p_hat is None else round(pg.p_hat, 3)}"
        f" <= second {None if ps.p_hat is None else round(ps.p_hat, 3)} within joint CI"
        f" ({'ok' if ordering_ok else 'violated'}); difference-table extra exponent"
        f" 5% bound {pd_.alpha_lower95 if pd_.alpha_lower95 is None else round(pd_.alpha_lower95, 3)}"
        f" > 0 ({'ok' if alpha_ok else 'failed'})"
    )
    artifacts = {
        "c7_q00.json": _json_bytes({"q00": q00}),
        "c7_reports.json": _json_bytes({k: r.to_jsonable() for k, r in reports.items()}),
    }
    return CheckResult(7, "decay-exponent ladder", passed, detail,
                       time.perf_counter() - t0, artifacts)


# ---------------------------------------------------------------------------
# criterion 8: Gaussian massive field against the exact spectral covariance


def check_8(threads: int = 1) -> CheckResult:
    t0 = time.perf_counter()
    grid = TorusGrid(2, 32)
    V = ConvexPotential(kappa=0.0)
    m = 0.5
    n_samples = 200
    controls = McmcControls()
    samples = sample_massive_batch(
        grid, V, m, controls, _SEED[8], list(range(n_samples))
    )
    phis = np.stack([s.phi for s in samples])
    n_sites = grid.n_sites

    # per-sample circular autocorrelation via FFT
    fhat = np.fft.fftn(phis, axes=(1, 2))
    corr = np.fft.ifftn(np.abs(fhat) ** 2, axes=(1, 2)).real / n_sites
    c_mean = corr.mean(axis=0)
    c_se = corr.std(axis=0, ddof=1) / np.sqrt(n_samples)

    oracle = constant_coeff_green(m**2, grid)
    sites = [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2)]
    worst_z = 0.0
    rows = []
    for s in sites:
        z = abs(c_mean[s] - oracle[s]) / c_se[s]
        worst_z = max(worst_z, float(z))
        rows.append({"site": list(s), "empirical": float(c_mean[s]),
                     "oracle": float(oracle[s]), "z": float(z)})
    cov_ok = worst_z <= 3.0

    # exponential-moment (Gaussian domination) checks on 5 fixed functionals
    fs = []
    f1 = np.zeros(grid.shape); f1[0, 0] = 0.5; fs.append(f1)
    f2 = np.zeros(grid.shape); f2[0, 0] = 0.5; f2[1, 0] = -0.5; fs.append(f2)
    f3 = (grid.radius() <= 3.0) * 0.05; fs.append(f3)
    x1 = grid.coordinate_arrays()[0]
    fs.append(0.2 * np.cos(2.0 * np.pi * 3.0 * x1 / grid.side))
    fs.append(0.05 * substream(_SEED[8], 0, 8).standard_normal(grid.shape))
    bl = [moment_bound_check(grid, phis, f, V.curvature_min, m) for f in fs]
    bl_ok = all(b["holds_within_3se"] for b in bl)
    stationary = all(s.diagnostics["stationary"] for s in samples)

    passed = cov_ok and bl_ok and stationary
    detail = (
        f"two-point vs spectral kernel: worst |z| = {worst_z:.2f} (<= 3) at "
        f"|x| in {{0,1,2}}; moment bound held for {sum(b['holds_within_3se'] for b in bl)}"
        f"/5 test functions; chains stationary: {stationary}"
    )
    artifacts = {
        "c8_corr.f64": c_mean.tobytes(),
        "c8_sites.json": _json_bytes(rows),
        "c8_bl.json": _json_bytes(bl),
    }
    return CheckResult(8, "Gaussian field oracle", passed, detail,
                       time.perf_counter() - t0, artifacts)


# ---------------------------------------------------------------------------
# criterion 9: exact massless gradient sampler in one dimension


def check_9(threads: int = 1) -> CheckResult:
    t0 = time.perf_counter()
    grid = TorusGrid(1, 10000)
    V = ConvexPotential(kappa=0.0)
    sample = sample_gradient_iid_1d(grid, V, _SEED[9], 0)
    omega = sample.omega[0]
    n = omega.size
    var = float(omega.var(ddof=1))
    se_var = float(np.sqrt(2.0 / (n - 1)))
    var_ok = abs(var - 1.0) <= 3.0 * se_var

    cmap = make_coefficient_map("tanh_isotropic", "vector", base=1.0, amp=0.5, rate=1.0)
    coeff = coeff_from_gradient(sample, cmap)
    try:
        coeff.check_bounds()
        elliptic_ok = True
    except ValueError:
        elliptic_ok = False
    ev = coeff.sitewise_eigenvalues()
    passed = var_ok and elliptic_ok
    detail = (
        f"empirical var(omega) = {var:.5f} vs 1 within 3 sigma ({3 * se_var:.5f}); "
        f"mapped coefficients elliptic at every site: {elliptic_ok} "
        f"(eigenvalues in [{ev.min():.4f}, {ev.max():.4f}], "
        f"declared [{cmap.bounds.lam}, {cmap.bounds.Lam}])"
    )
    artifacts = {
        "c9_summary.json": _json_bytes(
            {"var": var, "se_var": se_var, "ev_min": float(ev.min()),
             "ev_max": float(ev.max())}
        )
    }
    return CheckResult(9, "massless 1-d exactness", passed, detail,
                       time.perf_counter() - t0, artifacts)


# ---------------------------------------------------------------------------
# criterion 10: Holder-scan self-test, synthetic and against the dense oracle


def check_10(threads: int = 1) -> CheckResult:
    t0 = time.perf_counter()
    # synthetic |xi|^(1/2) modulus on an evenly spaced scan grid: every
    # separation is then realized by a pair touching 0, which dominates its
    # family, so the per-separation envelope is an exact power law
    xi_pts = [np.array([0.04 * k]) for k in range(8)]
    q_syn = np.zeros((1, len(xi_pts), 1, 1, 1), dtype=np.complex128)
    for i, xi in enumerate(xi_pts):
        q_syn[0, i, 0, 0, 0] = np.sqrt(abs(float(xi[0])))
    rep_syn = holder_scan_from_samples(
        xi_pts, [1e-3], q_syn, 1.0, boot_seed=_SEED[10], n_boot=200
    )
    syn_ok = rep_syn.alpha is not None and abs(rep_syn.alpha - 0.5) <= 0.05

    # Bernoulli d=1 against the dense oracle, common samples across xi; the
    # scan grid sits in the growth window |xi| ~ sqrt(eta) .. 3 sqrt(eta)
    # where the modulus of continuity actually follows a power law (above
    # ~0.1 it saturates and below ~0.01 the response is quadratic)
    env = bernoulli_environment(0.5)
    grid = TorusGrid(1, 256)
    eta = 1e-3
    xi_scan = [np.array([x]) for x in (0.0, 0.0125, 0.025, 0.05, 0.1)]
    n_samples = 64
    q_scan = np.zeros((n_samples, len(xi_scan), 1, 1, 1), dtype=np.complex128)
    for i in range(n_samples):
        a_line = env.draw(grid, _SEED[10], i).a[0, 0]
        for j, xi in enumerate(xi_scan):
            q_scan[i, j, 0, 0, 0] = exact_q_1d_dense(a_line, float(xi[0]), eta)
    rep_scan = holder_scan_from_samples(
        xi_scan, [eta], q_scan, env.bounds.Lam, boot_seed=_SEED[10] + 1, n_boot=200
    )
    scan_ok = (
        rep_scan.alpha_lower95 is not None
        and rep_scan.alpha_lower95 > 0.0
        and not rep_scan.degenerate
    )
    passed = syn_ok and scan_ok
    detail = (
        f"synthetic sqrt modulus: alpha = "
        f"{None if rep_syn.alpha is None else round(rep_syn.alpha, 4)} "
        f"(target 0.5 +- 0.05); Bernoulli d=1 dense-oracle scan: alpha 5% bound "
        f"{None if rep_scan.alpha_lower95 is None else round(rep_scan.alpha_lower95, 4)}"
        f" > 0 ({'ok' if scan_ok else 'failed'})"
    )
    artifacts = {
        "c10_synthetic.json": _json_bytes(rep_syn.to_jsonable()),
        "c10_scan.json": _json_bytes(rep_scan.to_jsonable()),
        "c10_qscan.c128": q_scan.tobytes(),
    }
    return CheckResult(10, "Holder scan self-test", passed, detail,
                       time.perf_counter() - t0, artifacts)


# ---------------------------------------------------------------------------
# criterion 11: cutoff mass defect and exact two-scale decomposition


def check_11(threads: int = 1) -> CheckResult:
    t0 = time.perf_counter()
    defects = {}
    worst_margin = -np.inf
    ok_mass = True
    for L_cut in (4, 8, 16, 32):
        grid = TorusGrid(2, 4 * L_cut)
        _, defect = lattice_cutoff_kernel(grid, CutoffSpec(L_cut))
        defects[L_cut] = defect
        margin = defect - 5.0 / L_cut
        worst_margin = max(worst_margin, margin)
        ok_mass = ok_mass and defect <= 5.0 / L_cut

    grid = TorusGrid(2, 64)
    table = GreensTable(grid, 0.1, "homogenized",
                        constant_coeff_green(0.1, grid))
    smoothed, remainder, info = cutoff_smooth(table, CutoffSpec(8))
    recon = smoothed.values + remainder.values
    exact = bool(np.array_equal(recon, table.values))
    max_dev = float(np.max(np.abs(recon - table.values)))
    passed = ok_mass and exact
    detail = (
        f"mass defects {({k: round(v, 6) for k, v in defects.items()})} all "
        f"<= 5/L_cut; smoothed + remainder == original bitwise: {exact} "
        f"(max dev {max_dev:.1e})"
    )
    artifacts = {
        "c11_defects.json": _json_bytes(defects),
        "c11_smoothed.f64": smoothed.values.tobytes(),
    }
    return CheckResult(11, "cutoff construction", passed, detail,
                       time.perf_counter() - t0, artifacts)


# ---------------------------------------------------------------------------
# criterion 12: rerun the battery at a different worker count, compare bytes


def check_12(threads: int = 1) -> CheckResult:
    t0 = time.perf_counter()
    other = 2 if threads == 1 else 1
    mismatches = []
    compared = 0
    for n in range(1, 12):
        first = run_check(n, threads=threads)
        again = run_check(n, threads=other)
        names_a = sorted(first.artifacts)
        names_b = sorted(again.artifacts)
        if names_a != names_b:
            mismatches.append(f"criterion {n}: artifact names differ")
            continue
        for name in names_a:
            compared += 1
            if first.artifacts[name] != again.artifacts[name]:
                mismatches.append(f"criterion {n}: {name} differs between "
                                  f"{threads} and {other} workers")
    passed = not mismatches
    detail = (
        f"{compared} artifacts byte-identical between {threads}-worker and "
        f"{other}-worker runs"
        if passed
        else "; ".join(mismatches)
    )
    artifacts = {"c12_manifest.json": _json_bytes(
        {"threads": [threads, other], "compared": compared,
         "mismatches": mismatches}
    )}
    return CheckResult(12, "byte-level reproducibility", passed, detail,
                       time.perf_counter() - t0, artifacts)


# ---------------------------------------------------------------------------

CHECKS = {
    1: check_1, 2: check_2, 3: check_3, 4: check_4, 5: check_5, 6: check_6,
    7: check_7, 8: check_8, 9: check_9, 10: check_10, 11: check_11, 12: check_12,
}


def run_check(number: int, threads: int = 1) -> CheckResult:
    """Run one criterion; results are cached per (criterion, thread count)."""
    if number not in CHECKS:
        raise ValueError(f"unknown criterion {number}; known: 1..12")
    key = ("result", number, threads)
    if key not in _shared:
        _shared[key] = CHECKS[number](threads)
    return _shared[key]


def run_battery(numbers=None, threads: int = 1) -> list[CheckResult]:
    numbers = list(numbers) if numbers is not None else list(range(1, 13))
    return [run_check(n, threads) for n in numbers]


def clear_cache() -> None:
    _shared.clear()
