"""Command-line front end.

Four subcommands cover the pipeline: `env` draws and serializes coefficient
fields, `qmatrix` maps the effective symbol over a (xi, eta) grid, `green`
produces averaged and homogenized kernel tables with decay-fit reports, and
`verify` runs the built-in acceptance battery.  Progress is line-delimited
JSON on stderr; data goes only to files (and the verify summary to stdout).

Exit codes: 0 success, 1 a verification check failed, 2 configuration
error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .effective import extrapolate_q00, holder_scan_from_samples, q_of_xi_eta, q_via_series
from .environments import make_environment
from .fieldio import write_csv, write_field
from .greens import (
    averaged_green,
    decay_fit,
    difference_tables,
    homogenized_doubling_drift,
    homogenized_green,
)
from .lattice import TorusGrid
from . import verify as verify_mod


def _log(event: str, **fields) -> None:
    rec = {"event": event}
    rec.update(fields)
    print(json.dumps(rec, sort_keys=True), file=sys.stderr, flush=True)


def _load(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    cfg = load_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError(f"--threads: must be >= 1, got {args.threads}")
        updates["threads"] = args.threads
    if getattr(args, "double_L", False):
        updates["double_side"] = True
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_env(args) -> int:
    cfg = _load(args)
    env = make_environment(cfg.environment)
    grid = TorusGrid(cfg.dim, cfg.side)
    out = _out_dir(cfg)
    sha = cfg.sha256
    _log("env.start", dim=cfg.dim, side=cfg.side, n_samples=cfg.n_samples,
         config_sha256=sha)
    summaries = []
    for i in range(cfg.n_samples):
        coeff = env.draw(grid, cfg.seed, i)
        path = out / f"env_{i:04d}.field"
        write_field(path, grid, coeff.a, "coef", config_hash=sha, seed=cfg.seed)
        ev = coeff.sitewise_eigenvalues()
        summaries.append(
            {
                "index": i,
                "file": path.name,
                "eig_min": float(ev.min()),
                "eig_max": float(ev.max()),
                "symmetry_defect": float(coeff.symmetry_defect()),
                "provenance": verify_mod._to_plain(coeff.provenance),
            }
        )
        _log("env.sample", index=i, eig_min=summaries[-1]["eig_min"],
             eig_max=summaries[-1]["eig_max"])
    meta = {
        "config_sha256": sha,
        "seed": cfg.seed,
        "bounds": {"lam": env.bounds.lam, "Lam": env.bounds.Lam},
        "samples": summaries,
    }
    (out / "env_summary.json").write_text(json.dumps(meta, sort_keys=True, indent=1))
    _log("env.done", n_samples=cfg.n_samples)
    return 0


def _symbol_rows(cfg: ExperimentConfig, env, grid) -> tuple[list[dict], np.ndarray]:
    d = cfg.dim
    xi_points = [np.asarray(p, dtype=np.float64) for p in cfg.xi_grid()]
    etas = list(cfg.eta_values)
    q_samples = np.empty(
        (cfg.n_samples, len(xi_points), len(etas), d, d), dtype=np.complex128
    )
    rows = []
    for i, xi in enumerate(xi_points):
        for e, eta in enumerate(etas):
            direct, qs = q_of_xi_eta(
                env, grid, xi, eta, cfg.n_samples, cfg.solver, cfg.seed,
                threads=cfg.threads, return_samples=True,
            )
            series = q_via_series(
                env, grid, xi, eta, 200, cfg.n_samples, cfg.solver, cfg.seed,
                threads=cfg.threads,
            )
            q_samples[:, i, e] = qs
            gap = float(np.linalg.norm(series.q - direct.q, 2))
            lo, hi = direct.rayleigh_range()
            row = {"eta": eta, "series_gap": gap, "rayleigh_min": lo,
                   "rayleigh_max": hi, "hermitian_defect": direct.hermitian_defect,
                   "n_samples": direct.n_samples}
            for j in range(d):
                row[f"xi_{j + 1}"] = float(xi[j])
            for j in range(d):
                for k in range(d):
                    row[f"q_re_{j + 1}{k + 1}"] = float(direct.q[j, k].real)
                    row[f"q_im_{j + 1}{k + 1}"] = float(direct.q[j, k].imag)
                    row[f"stderr_{j + 1}{k + 1}"] = float(direct.stderr[j, k])
            rows.append(row)
            _log("qmatrix.point", xi=[float(v) for v in xi], eta=eta,
                 series_gap=gap)
    return rows, q_samples


def cmd_qmatrix(args) -> int:
    cfg = _load(args)
    env = make_environment(cfg.environment)
    grid = TorusGrid(cfg.dim, cfg.side)
    out = _out_dir(cfg)
    sha = cfg.sha256
    _log("qmatrix.start", dim=cfg.dim, side=cfg.side,
         n_points=len(cfg.xi_grid()) * len(cfg.eta_values), config_sha256=sha)

    rows, q_samples = _symbol_rows(cfg, env, grid)

    if cfg.eta_ladder:
        sym0 = extrapolate_q00(
            env, grid, list(cfg.eta_ladder), cfg.n_samples, cfg.solver, cfg.seed,
            threads=cfg.threads,
        )
        row = {"eta": 0.0, "series_gap": float("nan"),
               "rayleigh_min": sym0.rayleigh_range()[0],
               "rayleigh_max": sym0.rayleigh_range()[1],
               "hermitian_defect": sym0.hermitian_defect,
               "n_samples": sym0.n_samples}
        for j in range(cfg.dim):
            row[f"xi_{j + 1}"] = 0.0
        for j in range(cfg.dim):
            for k in range(cfg.dim):
                row[f"q_re_{j + 1}{k + 1}"] = float(sym0.q[j, k].real)
                row[f"q_im_{j + 1}{k + 1}"] = float(sym0.q[j, k].imag)
                row[f"stderr_{j + 1}{k + 1}"] = float(sym0.stderr[j, k])
        row["extrapolation_spread"] = sym0.diagnostics["extrapolation_spread"]
        rows.append(row)
        _log("qmatrix.extrapolated",
             q00_diag=[float(sym0.q[j, j].real) for j in range(cfg.dim)],
             spread=sym0.diagnostics["extrapolation_spread"])

    cols = sorted({k for r in rows for k in r})
    with open(out / "qmatrix.csv", "w") as fh:
        fh.write(f"# config_sha256={sha}\n")
        fh.write(f"# seed={cfg.seed}\n")
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(r.get(c, float("nan")))) for c in cols) + "\n")

    xi_points = [np.asarray(p, dtype=np.float64) for p in cfg.xi_grid()]
    if len(xi_points) >= 2:
        scan = holder_scan_from_samples(
            xi_points, list(cfg.eta_values), q_samples, env.bounds.Lam,
            boot_seed=cfg.seed,
        )
        report = scan.to_jsonable()
        report["config_sha256"] = sha
        report["seed"] = cfg.seed
        (out / "holder_scan.json").write_text(
            json.dumps(verify_mod._to_plain(report), sort_keys=True, indent=1)
        )
        _log("qmatrix.holder", alpha=report.get("alpha"),
             degenerate=report.get("degenerate"))
    _log("qmatrix.done", n_rows=len(rows))
    return 0


def _green_once(cfg: ExperimentConfig, env, grid, out: Path, tag: str) -> None:
    sha = cfg.sha256
    if cfg.eta_ladder:
        q00_sym = extrapolate_q00(
            env, grid, list(cfg.eta_ladder), cfg.n_samples, cfg.solver, cfg.seed,
            threads=cfg.threads,
        )
    else:
        q00_sym = q_of_xi_eta(
            env, grid, np.zeros(cfg.dim), min(cfg.eta_values), cfg.n_samples,
            cfg.solver, cfg.seed, threads=cfg.threads,
        )
        _log("green.q00_fallback", eta=min(cfg.eta_values))
    q00 = 0.5 * (q00_sym.q + q00_sym.q.conj().T)
    _log("green.q00", tag=tag,
         diag=[float(q00[j, j].real) for j in range(cfg.dim)])

    claim_tables: dict[str, list] = {c: [] for c in cfg.claims}
    for eta in cfg.eta_values:
        avg = averaged_green(
            env, grid, eta, cfg.n_samples, cfg.solver, cfg.seed,
            n_sources=cfg.n_sources, threads=cfg.threads,
        )
        hom = homogenized_green(q00, eta, grid)
        diffs = difference_tables(avg, hom)
        stem = f"{tag}eta_{eta:g}"
        write_field(out / f"{stem}_averaged.field", grid, avg.value.values,
                    "rsca", config_hash=sha, seed=cfg.seed)
        write_field(out / f"{stem}_homogenized.field", grid, hom.values,
                    "rsca", config_hash=sha, seed=cfg.seed)
        write_csv(
            out / f"{stem}_tables.csv", grid,
            {
                "averaged": avg.value.values,
                "averaged_stderr": avg.value.stderr,
                "homogenized": hom.values,
                "difference": diffs["difference"].values,
                "flip_asymmetry": avg.asymmetry.values,
            },
            config_hash=sha, seed=cfg.seed,
        )
        for claim in cfg.claims:
            if claim == "value":
                claim_tables[claim].append(avg.value)
            elif claim == "gradient":
                claim_tables[claim].append(avg.gradient)
            else:
                claim_tables[claim].append(diffs[claim])
        _log("green.eta_done", tag=tag, eta=eta, dropped=avg.n_dropped)

    reports = {}
    for claim, tables in claim_tables.items():
        rep = decay_fit(tables, claim, env.bounds.Lam, boot_seed=cfg.seed)
        reports[claim] = rep.to_jsonable()
        _log("green.fit", tag=tag, claim=claim, p_hat=rep.p_hat,
             insufficient=rep.insufficient_signal)
    drift = homogenized_doubling_drift(q00, min(cfg.eta_values), grid)
    meta = {
        "config_sha256": sha,
        "seed": cfg.seed,
        "q00": verify_mod._to_plain(q00),
        "homogenized_doubling_drift": drift,
        "fits": reports,
    }
    (out / f"{tag}decay_fits.json").write_text(
        json.dumps(verify_mod._to_plain(meta), sort_keys=True, indent=1)
    )


def cmd_green(args) -> int:
    cfg = _load(args)
    env = make_environment(cfg.environment)
    out = _out_dir(cfg)
    _log("green.start", dim=cfg.dim, side=cfg.side, etas=list(cfg.eta_values),
         config_sha256=cfg.sha256)
    _green_once(cfg, env, TorusGrid(cfg.dim, cfg.side), out, "")
    if cfg.double_side:
        _log("green.doubling", side=2 * cfg.side)
        _green_once(cfg, env, TorusGrid(cfg.dim, 2 * cfg.side), out, "L2x_")
    _log("green.done")
    return 0


def cmd_verify(args) -> int:
    checks = None
    threads = args.threads if args.threads is not None else 1
    out = Path(args.out) if args.out else None
    if args.config:
        cfg_raw = load_config(args.config)
        checks = cfg_raw.raw.get("verify", {}).get("checks")
        if checks is not None:
            if not isinstance(checks, list) or not all(
                isinstance(c, int) and 1 <= c <= 12 for c in checks
            ):
                raise ConfigError("verify.checks: must be a list of integers in 1..12")
        if args.threads is None:
            threads = cfg_raw.threads
        if out is None:
            out = Path(cfg_raw.out_dir)

    numbers = checks if checks is not None else list(range(1, 13))
    _log("verify.start", checks=numbers, threads=threads)
    results = []
    for n in numbers:
        res = verify_mod.run_check(n, threads=threads)
        results.append(res)
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} criterion {res.number}: {res.name} [{res.elapsed:.1f}s] {res.detail}")
        _log("verify.check", number=res.number, passed=res.passed,
             elapsed=round(res.elapsed, 3))

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        for res in results:
            for name, blob in res.artifacts.items():
                (out / name).write_bytes(blob)
        summary = [
            {"number": r.number, "name": r.name, "passed": r.passed,
             "detail": r.detail, "elapsed": round(r.elapsed, 3)}
            for r in results
        ]
        (out / "verify_summary.json").write_text(
            json.dumps(summary, sort_keys=True, indent=1)
        )
    n_failed = sum(not r.passed for r in results)
    _log("verify.done", failed=n_failed)
    return 1 if n_failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hlab",
        description="lattice homogenization laboratory: averaged Green's "
        "functions, effective symbols, and their verification suite",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_double in (
        ("env", cmd_env, False),
        ("qmatrix", cmd_qmatrix, False),
        ("green", cmd_green, True),
        ("verify", cmd_verify, False),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML (or JSON) experiment configuration")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--out", help="override run.out output directory")
        p.add_argument("--threads", type=int, help="override run.threads")
        if needs_double:
            p.add_argument("--double-L", dest="double_L", action="store_true",
                           help="also run at twice the torus side")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        _log("error.config", message=str(exc))
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        _log("error.runtime", kind=type(exc).__name__, message=str(exc))
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
