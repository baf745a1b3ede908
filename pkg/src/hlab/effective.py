"""The effective symbol q(xi, eta), its eta -> 0 extrapolation, Holder scans.

q(xi, eta) is the torus average of a (grad_xi Phi + I) over corrector
solutions, averaged over environment samples.  Monte Carlo over environments
and spatial averaging over the torus are combined; both the sample count and
the torus size matter and both are reported.

q at eta = 0 is never computed directly (the torus zero mode forbids it); it
is Richardson-extrapolated along a decreasing eta ladder in powers of
sqrt(eta), the exponent suggested by the |delta eta|^(alpha/2) continuity
modulus of q.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .environments import EnvironmentSpec
from .lattice import TorusGrid
from .parallel import map_indexed
from .rng import substream
from .solver import (
    CorrectorSolution,
    SolveControls,
    solve_corrector_direct,
    solve_corrector_neumann,
)

ETA_FLOOR = 1e-8


@dataclass
class EffectiveSymbol:
    """q(xi, eta) with Monte Carlo error bars."""

    xi: np.ndarray
    eta: float
    q: np.ndarray  # (d, d) complex, Hermitian-symmetrized
    stderr: np.ndarray  # (d, d) real
    n_samples: int
    hermitian_defect: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def rayleigh_range(self) -> tuple[float, float]:
        """Extreme eigenvalues of the real part of q."""
        sym = 0.5 * (self.q.real + self.q.real.T)
        ev = np.linalg.eigvalsh(sym)
        return float(ev.min()), float(ev.max())

    def stderr_scale(self) -> float:
        return float(np.linalg.norm(self.stderr, 2))


def _check_eta(eta: float) -> float:
    if eta < ETA_FLOOR:
        raise ValueError(
            f"eta = {eta} is below the floor {ETA_FLOOR}; the torus zero mode "
            f"forbids eta -> 0 solves (use extrapolate_q00)"
        )
    return float(eta)


def q_from_corrector(a_values: np.ndarray, sol: CorrectorSolution) -> np.ndarray:
    """Per-sample symbol: q[j, k] = < [a (grad_xi Phi_k + e_k)]_j > over the torus."""
    d = sol.grid.dim
    axes = tuple(range(1, 1 + sol.grid.dim))
    q = np.empty((d, d), dtype=np.complex128)
    for k in range(d):
        flux = np.einsum("jl...,l...->j...", a_values, sol.grad_phi[k])
        q[:, k] = flux.mean(axis=axes) + a_values[:, k].mean(axis=axes)
    return q


def _q_sample_direct(args):
    env, grid, xi, eta, controls, master_seed, index = args
    a = env.draw(grid, master_seed, index)
    sol = solve_corrector_direct(a, xi, eta, controls)
    return q_from_corrector(a.a, sol)


def _q_sample_series(args):
    env, grid, xi, eta, controls, master_seed, index, max_terms = args
    a = env.draw(grid, master_seed, index)
    sol, diag = solve_corrector_neumann(a, xi, eta, max_terms, controls)
    axes = tuple(range(2, 2 + grid.dim))
    mean_a = a.a.mean(axis=axes)
    q = mean_a - a.bounds.Lam * diag["h_terms"].sum(axis=0)
    norms = np.asarray([np.linalg.norm(h, 2) for h in diag["h_terms"]])
    return q, norms, diag["fitted_ratio"]


def _aggregate(q_samples: np.ndarray, xi, eta, diagnostics=None) -> EffectiveSymbol:
    n = q_samples.shape[0]
    mean = q_samples.mean(axis=0)
    if n > 1:
        var = q_samples.real.var(axis=0, ddof=1) + q_samples.imag.var(axis=0, ddof=1)
        stderr = np.sqrt(var / n)
    else:
        stderr = np.zeros_like(mean, dtype=np.float64)
    scale = max(np.linalg.norm(mean, 2), 1e-300)
    defect = float(np.linalg.norm(mean - mean.conj().T, 2) / scale)
    sym = 0.5 * (mean + mean.conj().T)
    return EffectiveSymbol(
        xi=np.asarray(xi, dtype=np.float64),
        eta=float(eta),
        q=sym,
        stderr=stderr,
        n_samples=n,
        hermitian_defect=defect,
        diagnostics=diagnostics or {},
    )


def q_of_xi_eta(
    env: EnvironmentSpec,
    grid: TorusGrid,
    xi: np.ndarray,
    eta: float,
    n_samples: int,
    controls: SolveControls | None = None,
    master_seed: int = 0,
    *,
    threads: int = 1,
    sample_offset: int = 0,
    return_samples: bool = False,
):
    """Monte Carlo evaluation of q via the direct corrector solve."""
    eta = _check_eta(eta)
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    controls = controls or SolveControls()
    tasks = [
        (env, grid, xi, eta, controls, master_seed, sample_offset + i)
        for i in range(n_samples)
    ]
    qs = np.stack(map_indexed(_q_sample_direct, tasks, threads))
    symbol = _aggregate(qs, xi, eta)
    _flag_bounds(symbol, env)
    if return_samples:
        return symbol, qs
    return symbol


def _flag_bounds(symbol: EffectiveSymbol, env: EnvironmentSpec) -> None:
    lo, hi = symbol.rayleigh_range()
    s = 3.0 * symbol.stderr_scale()
    b = env.bounds
    ok = (lo >= b.lam - s - 1e-12) and (hi <= b.Lam + s + 1e-12)
    symbol.diagnostics["bounds_ok"] = bool(ok)
    symbol.diagnostics["rayleigh_range"] = (lo, hi)
    if not ok:
        symbol.diagnostics["bounds_violation"] = (
            f"Re q eigenvalues [{lo:.6f}, {hi:.6f}] outside "
            f"[{b.lam}, {b.Lam}] by more than 3 stderr = {s:.2e}"
        )


def q_via_series(
    env: EnvironmentSpec,
    grid: TorusGrid,
    xi: np.ndarray,
    eta: float,
    m_max: int = 200,
    n_samples: int = 1,
    controls: SolveControls | None = None,
    master_seed: int = 0,
    *,
    threads: int = 1,
    sample_offset: int = 0,
    return_samples: bool = False,
):
    """Monte Carlo evaluation of q via the truncated contraction series.

    Shares sample streams with q_of_xi_eta, so running both with the same
    seed compares the two algorithms on identical environments.
    """
    eta = _check_eta(eta)
    controls = controls or SolveControls()
    tasks = [
        (env, grid, xi, eta, controls, master_seed, sample_offset + i, m_max)
        for i in range(n_samples)
    ]
    results = map_indexed(_q_sample_series, tasks, threads)
    qs = np.stack([r[0] for r in results])
    max_len = max(len(r[1]) for r in results)
    norm_table = np.zeros((len(results), max_len))
    for i, r in enumerate(results):
        norm_table[i, : len(r[1])] = r[1]
    mean_norms = norm_table.mean(axis=0)
    ratios = [r[2] for r in results]
    diagnostics = {
        "term_norms_mean": [float(v) for v in mean_norms],
        "fitted_ratio_mean": float(np.mean(ratios)),
        "fitted_ratio_max": float(np.max(ratios)),
        "contraction_bound": 1.0 - env.bounds.lam / env.bounds.Lam,
    }
    symbol = _aggregate(qs, xi, eta, diagnostics)
    _flag_bounds(symbol, env)
    if return_samples:
        return symbol, qs
    return symbol


def extrapolate_q00(
    env: EnvironmentSpec,
    grid: TorusGrid,
    eta_ladder: list[float],
    n_samples: int,
    controls: SolveControls | None = None,
    master_seed: int = 0,
    *,
    threads: int = 1,
) -> EffectiveSymbol:
    """Richardson extrapolation of q(0, eta) to eta = 0 in powers of sqrt(eta).

    The same sample streams are reused across the ladder (common random
    numbers), the extrapolation is applied per sample, and the sample spread
    of the extrapolated values provides the error bar.  The spread between
    consecutive-pair estimates is reported as a systematic uncertainty.
    """
    ladder = [float(e) for e in eta_ladder]
    if len(ladder) < 3:
        raise ValueError(f"eta ladder needs >= 3 entries, got {len(ladder)}")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError(f"eta ladder must be strictly decreasing, got {ladder}")
    for e in ladder:
        _check_eta(e)
    d = grid.dim
    xi0 = np.zeros(d)

    per_eta = []
    symbols = []
    for eta in ladder:
        sym, qs = q_of_xi_eta(
            env, grid, xi0, eta, n_samples, controls, master_seed,
            threads=threads, return_samples=True,
        )
        symbols.append(sym)
        per_eta.append(qs)

    roots = np.sqrt(np.asarray(ladder))
    # pairwise Richardson on consecutive ladder entries, per sample:
    # qhat = (v_{i+1} sqrt(eta_i) - v_i sqrt(eta_{i+1})) / (sqrt(eta_i) - sqrt(eta_{i+1}))
    pair_samples = []
    for i in range(len(ladder) - 1):
        r0, r1 = roots[i], roots[i + 1]
        pair_samples.append((per_eta[i + 1] * r0 - per_eta[i] * r1) / (r0 - r1))
    final = _aggregate(pair_samples[-1], xi0, 0.0)

    pair_means = [p.mean(axis=0) for p in pair_samples]
    spread = max(
        float(np.linalg.norm(pm - pair_means[-1], 2)) for pm in pair_means
    )

    # flag ladder values whose drift toward eta = 0 changes sign beyond noise
    monotone = True
    diag_vals = np.asarray([s.q.real.diagonal() for s in symbols])  # (n_eta, d)
    diag_errs = np.asarray([s.stderr.diagonal() for s in symbols])
    steps = np.diff(diag_vals, axis=0)
    step_errs = np.hypot(diag_errs[:-1], diag_errs[1:])
    for j in range(d):
        signif = steps[:, j][np.abs(steps[:, j]) > 3.0 * step_errs[:, j]]
        if signif.size >= 2 and (np.any(signif > 0) and np.any(signif < 0)):
            monotone = False

    final.diagnostics.update(
        {
            "eta_ladder": ladder,
            "ladder_values": [s.q for s in symbols],
            "ladder_stderr": [s.stderr for s in symbols],
            "pair_estimates": pair_means,
            "extrapolation_spread": spread,
            "monotone": monotone,
        }
    )
    _flag_bounds(final, env)
    return final


# ---------------------------------------------------------------------------
# Holder continuity scans


@dataclass
class HolderScanReport:
    """Fitted continuity modulus ||q(xi') - q(xi)|| ~ C1 Lambda |xi' - xi|^alpha."""

    alpha: float | None
    alpha_raw_slope: float | None
    alpha_lower95: float | None
    C1: float | None
    eta_alpha: float | None  # from the eta direction, slope doubled
    n_pairs_used: int
    n_pairs_excluded: int
    residual_rms: float | None
    degenerate: bool
    insufficient_signal: bool
    n_samples: int
    seed: int
    details: dict = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if k == "details":
                continue
            out[k] = v
        return out


def _pair_table(points: list, values_by_point: list[np.ndarray]):
    """All unordered pairs: separations and per-sample difference stacks."""
    seps, diffs = [], []
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            seps.append(float(np.linalg.norm(np.atleast_1d(points[i]) - np.atleast_1d(points[j]))))
            diffs.append(values_by_point[i] - values_by_point[j])
    return np.asarray(seps), diffs


def _fit_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    coeff = np.polyfit(x, y, 1)
    return float(coeff[0]), float(coeff[1])


def fit_holder_modulus(
    separations: np.ndarray,
    diff_samples: list[np.ndarray],
    Lam: float,
    *,
    boot_seed: int = 0,
    n_boot: int = 200,
) -> dict:
    """Fit log of the per-separation envelope against log separation.

    diff_samples[p] has shape (n_samples, d, d); pairs whose mean difference
    norm is below 3x its standard error (or exactly zero) are excluded.
    Because the continuity claim is a sup bound, surviving pairs are grouped
    by separation and only the largest norm at each separation enters the
    regression; pooling every pair would tilt the slope whenever pair
    families with different prefactors cover separations unevenly.  The
    bootstrap resamples environment samples, preserving the common-random-
    number coupling between pairs, or falls back to a residual bootstrap
    for deterministic inputs.
    """
    n_pairs = len(diff_samples)
    if n_pairs == 0:
        return {"degenerate": True, "n_used": 0, "n_excluded": 0}
    n_samples = diff_samples[0].shape[0]

    def norms_and_floor(stacks):
        norms = np.empty(len(stacks))
        floors = np.empty(len(stacks))
        for p, st in enumerate(stacks):
            mean = st.mean(axis=0)
            norms[p] = np.linalg.norm(mean, 2)
            if st.shape[0] > 1:
                var = st.real.var(axis=0, ddof=1) + st.imag.var(axis=0, ddof=1)
                floors[p] = np.linalg.norm(np.sqrt(var / st.shape[0]))
            else:
                floors[p] = 0.0
        return norms, floors

    def envelope(norms, mask):
        # group by separation (log rounded to merge float-equal values)
        groups: dict[float, int] = {}
        for p in np.flatnonzero(mask):
            key = round(float(np.log(separations[p])), 9)
            best = groups.get(key)
            if best is None or norms[p] > norms[best]:
                groups[key] = p
        picks = sorted(groups.values(), key=lambda p: separations[p])
        return np.asarray(picks, dtype=np.intp)

    norms, floors = norms_and_floor(diff_samples)
    keep = (norms > 3.0 * floors) & (norms > 0.0)
    n_used = int(keep.sum())
    n_excluded = n_pairs - n_used
    out = {
        "n_used": n_used,
        "n_excluded": n_excluded,
        "insufficient_signal": n_excluded > n_pairs // 2,
    }
    env_idx = envelope(norms, keep)
    out["n_separations"] = int(env_idx.size)
    if env_idx.size < 2:
        out["degenerate"] = True
        return out

    x = np.log(separations[env_idx])
    y = np.log(norms[env_idx])
    slope, intercept = _fit_line(x, y)
    resid = y - (slope * x + intercept)
    out.update(
        {
            "degenerate": False,
            "slope": slope,
            "intercept": intercept,
            "C1": float(np.exp(intercept) / Lam),
            "residual_rms": float(np.sqrt(np.mean(resid**2))),
        }
    )

    if n_samples > 1 and n_boot > 0:
        rng = substream(boot_seed, 0, 77)
        slopes = []
        for _ in range(n_boot):
            pick = rng.integers(0, n_samples, size=n_samples)
            bnorms = np.empty(n_pairs)
            for p, st in enumerate(diff_samples):
                bnorms[p] = np.linalg.norm(st[pick].mean(axis=0), 2)
            bidx = envelope(bnorms, keep & (bnorms > 0))
            if bidx.size < 2:
                continue
            s, _ = _fit_line(np.log(separations[bidx]), np.log(bnorms[bidx]))
            slopes.append(s)
        if slopes:
            slopes = np.sort(np.asarray(slopes))
            out["slope_se"] = float(slopes.std(ddof=1)) if len(slopes) > 1 else 0.0
            out["slope_q05"] = float(np.quantile(slopes, 0.05))
            out["slope_q95"] = float(np.quantile(slopes, 0.95))
    elif n_boot > 0:
        # deterministic inputs: residual bootstrap over envelope points
        rng = substream(boot_seed, 0, 78)
        slopes = []
        for _ in range(n_boot):
            yb = slope * x + intercept + rng.choice(resid, size=resid.size, replace=True)
            s, _ = _fit_line(x, yb)
            slopes.append(s)
        slopes = np.sort(np.asarray(slopes))
        out["slope_se"] = float(slopes.std(ddof=1)) if len(slopes) > 1 else 0.0
        out["slope_q05"] = float(np.quantile(slopes, 0.05))
        out["slope_q95"] = float(np.quantile(slopes, 0.95))
    return out


def holder_scan_from_samples(
    xi_points: list[np.ndarray],
    eta_points: list[float],
    q_samples: np.ndarray,
    Lam: float,
    *,
    boot_seed: int = 0,
    n_boot: int = 200,
) -> HolderScanReport:
    """Holder-modulus fits from a per-sample symbol table.

    q_samples has shape (n_samples, n_xi, n_eta, d, d), sampled with common
    random numbers across grid points so differences are low-noise.
    """
    q_samples = np.asarray(q_samples)
    n_samples = q_samples.shape[0]

    # xi direction: pairs within each eta row, pooled
    seps_all, diffs_all = [], []
    for e in range(len(eta_points)):
        seps, diffs = _pair_table(
            xi_points, [q_samples[:, i, e] for i in range(len(xi_points))]
        )
        seps_all.append(seps)
        diffs_all.extend(diffs)
    seps_xi = np.concatenate(seps_all) if seps_all else np.asarray([])
    fit_xi = fit_holder_modulus(
        seps_xi, diffs_all, Lam, boot_seed=boot_seed, n_boot=n_boot
    )

    # eta direction: pairs within each xi column, pooled, separation |d eta| / Lam
    seps_all, diffs_all = [], []
    for i in range(len(xi_points)):
        seps, diffs = _pair_table(
            [np.asarray([e / Lam]) for e in eta_points],
            [q_samples[:, i, e] for e in range(len(eta_points))],
        )
        seps_all.append(seps)
        diffs_all.extend(diffs)
    seps_eta = np.concatenate(seps_all) if seps_all else np.asarray([])
    fit_eta = fit_holder_modulus(
        seps_eta, diffs_all, Lam, boot_seed=boot_seed + 1, n_boot=n_boot
    )

    degenerate = bool(fit_xi.get("degenerate", True))
    raw = fit_xi.get("slope")
    alpha = None if raw is None else float(np.clip(raw, 1e-6, 1.0))
    eta_alpha = None
    if not fit_eta.get("degenerate", True):
        eta_alpha = float(np.clip(2.0 * fit_eta["slope"], 1e-6, 2.0))
    return HolderScanReport(
        alpha=None if degenerate else alpha,
        alpha_raw_slope=raw,
        alpha_lower95=fit_xi.get("slope_q05"),
        C1=fit_xi.get("C1"),
        eta_alpha=eta_alpha,
        n_pairs_used=int(fit_xi.get("n_used", 0)),
        n_pairs_excluded=int(fit_xi.get("n_excluded", 0)),
        residual_rms=fit_xi.get("residual_rms"),
        degenerate=degenerate,
        insufficient_signal=bool(fit_xi.get("insufficient_signal", False)),
        n_samples=n_samples,
        seed=boot_seed,
        details={"fit_xi": fit_xi, "fit_eta": fit_eta},
    )


def holder_scan(
    env: EnvironmentSpec,
    grid: TorusGrid,
    xi_points: list[np.ndarray],
    eta_points: list[float],
    n_samples: int,
    controls: SolveControls | None = None,
    master_seed: int = 0,
    *,
    threads: int = 1,
    n_boot: int = 200,
) -> HolderScanReport:
    """Measure the continuity modulus of q over a (xi, eta) grid.

    This is a measurement, not a pass/fail check; flags report degenerate or
    noise-dominated fits.  Grids should carry at least 8 points per axis for
    a meaningful fit window.
    """
    if len(xi_points) < 2 or len(eta_points) < 1:
        raise ValueError("holder_scan needs >= 2 xi points and >= 1 eta point")
    d = grid.dim
    q_samples = np.empty(
        (n_samples, len(xi_points), len(eta_points), d, d), dtype=np.complex128
    )
    for i, xi in enumerate(xi_points):
        for e, eta in enumerate(eta_points):
            _, qs = q_of_xi_eta(
                env, grid, xi, eta, n_samples, controls, master_seed,
                threads=threads, return_samples=True,
            )
            q_samples[:, i, e] = qs
    return holder_scan_from_samples(
        xi_points, eta_points, q_samples, env.bounds.Lam,
        boot_seed=master_seed, n_boot=n_boot,
    )
