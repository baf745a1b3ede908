"""Experiment configuration: loading, validation, canonical hashing.

Configs are TOML (JSON accepted as a fallback by extension or on parse
failure).  Validation errors name the offending key path so a typo in a
nested table points at itself.  The canonical hash is the sha256 of the
JSON serialization with sorted keys, which every artifact embeds so output
files can be traced back to the exact configuration that produced them.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field

from .solver import SolveControls

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """A configuration file failed to parse or validate."""


def load_raw_config(path: str) -> dict:
    """Parse a TOML (or JSON) config file into a plain dict."""
    with open(path, "rb") as fh:
        data = fh.read()
    if path.endswith(".json"):
        try:
            return json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    try:
        return tomllib.loads(data.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as toml_exc:
        try:
            return json.loads(data)
        except json.JSONDecodeError:
            raise ConfigError(f"{path}: invalid TOML: {toml_exc}") from toml_exc


def config_hash(raw: dict) -> str:
    """sha256 of the canonical (sorted-key, compact) JSON form."""
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _get(raw: dict, path: str, default=None, required: bool = False):
    node = raw
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(f"{path}: missing required key")
            return default
        node = node[part]
    return node


def _require_type(value, path: str, kinds, desc: str):
    if isinstance(value, bool) and bool not in (
        kinds if isinstance(kinds, tuple) else (kinds,)
    ):
        raise ConfigError(f"{path}: must be {desc}, got a boolean")
    if not isinstance(value, kinds):
        raise ConfigError(f"{path}: must be {desc}, got {type(value).__name__}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description driving every CLI subcommand."""

    dim: int
    side: int
    double_side: bool
    seed: int
    threads: int
    out_dir: str
    environment: dict
    solver: SolveControls
    n_samples: int
    n_sources: int
    eta_values: tuple[float, ...]
    eta_ladder: tuple[float, ...]
    xi_axis: tuple[float, ...]
    claims: tuple[str, ...]
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def sha256(self) -> str:
        return config_hash(self.raw)

    def xi_grid(self) -> list[tuple[float, ...]]:
        """Cartesian product of the per-axis xi values over the dimension."""
        points: list[tuple[float, ...]] = [()]
        for _ in range(self.dim):
            points = [p + (x,) for p in points for x in self.xi_axis]
        return points


_KNOWN_CLAIMS = (
    "value",
    "gradient",
    "difference",
    "gradient_difference",
    "second_difference",
)


def validate_config(raw: dict) -> ExperimentConfig:
    """Type- and range-check a raw config, reporting errors by key path."""
    dim = _require_type(_get(raw, "grid.dim", required=True), "grid.dim", int, "an integer")
    if not 1 <= dim <= 3:
        raise ConfigError(f"grid.dim: must be 1, 2, or 3, got {dim}")
    side = _require_type(_get(raw, "grid.side", required=True), "grid.side", int, "an integer")
    if side < 2 or side % 2:
        raise ConfigError(f"grid.side: must be an even integer >= 2, got {side}")
    double_side = _require_type(
        _get(raw, "grid.double_side", False), "grid.double_side", bool, "a boolean"
    )

    seed = _require_type(_get(raw, "run.seed", 0), "run.seed", int, "an integer")
    if seed < 0:
        raise ConfigError(f"run.seed: must be >= 0, got {seed}")
    threads = _require_type(_get(raw, "run.threads", 1), "run.threads", int, "an integer")
    if threads < 1:
        raise ConfigError(f"run.threads: must be >= 1, got {threads}")
    n_samples = _require_type(
        _get(raw, "run.n_samples", 8), "run.n_samples", int, "an integer"
    )
    if n_samples < 1:
        raise ConfigError(f"run.n_samples: must be >= 1, got {n_samples}")
    n_sources = _require_type(
        _get(raw, "run.n_sources", 1), "run.n_sources", int, "an integer"
    )
    if n_sources < 1:
        raise ConfigError(f"run.n_sources: must be >= 1, got {n_sources}")
    out_dir = _require_type(_get(raw, "run.out", "out"), "run.out", str, "a string")

    env = _get(raw, "environment", required=True)
    _require_type(env, "environment", dict, "a table")

    tol = _get(raw, "solver.rel_tolerance", 1e-10)
    _require_type(tol, "solver.rel_tolerance", (int, float), "a number")
    max_it = _require_type(
        _get(raw, "solver.max_iterations", 2000), "solver.max_iterations", int, "an integer"
    )
    precond = _require_type(
        _get(raw, "solver.preconditioner", "spectral_constant_coeff"),
        "solver.preconditioner", str, "a string",
    )
    try:
        controls = SolveControls(
            rel_tolerance=float(tol), max_iterations=max_it, preconditioner=precond
        )
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc

    def float_list(path: str, default):
        vals = _get(raw, path, default)
        _require_type(vals, path, list, "a list of numbers")
        out = []
        for i, v in enumerate(vals):
            _require_type(v, f"{path}[{i}]", (int, float), "a number")
            out.append(float(v))
        return tuple(out)

    eta_values = float_list("q.eta_values", [0.1])
    for i, e in enumerate(eta_values):
        if e <= 0:
            raise ConfigError(f"q.eta_values[{i}]: must be > 0, got {e}")
    eta_ladder = float_list("q.eta_ladder", [])
    if eta_ladder:
        if len(eta_ladder) < 3:
            raise ConfigError(
                f"q.eta_ladder: extrapolation needs >= 3 values, got {len(eta_ladder)}"
            )
        for i, e in enumerate(eta_ladder):
            if e <= 0:
                raise ConfigError(f"q.eta_ladder[{i}]: must be > 0, got {e}")
            if i and e >= eta_ladder[i - 1]:
                raise ConfigError("q.eta_ladder: values must be strictly decreasing")
    xi_axis = float_list("q.xi_axis", [0.0])

    claims_raw = _get(raw, "green.claims", list(_KNOWN_CLAIMS))
    _require_type(claims_raw, "green.claims", list, "a list of claim names")
    claims = []
    for i, c in enumerate(claims_raw):
        _require_type(c, f"green.claims[{i}]", str, "a string")
        if c not in _KNOWN_CLAIMS:
            raise ConfigError(
                f"green.claims[{i}]: unknown claim {c!r}; known: {list(_KNOWN_CLAIMS)}"
            )
        claims.append(c)

    return ExperimentConfig(
        dim=dim,
        side=side,
        double_side=double_side,
        seed=seed,
        threads=threads,
        out_dir=out_dir,
        environment=dict(env),
        solver=controls,
        n_samples=n_samples,
        n_sources=n_sources,
        eta_values=eta_values,
        eta_ladder=eta_ladder,
        xi_axis=xi_axis,
        claims=tuple(claims),
        raw=raw,
    )


def load_config(path: str) -> ExperimentConfig:
    return validate_config(load_raw_config(path))
