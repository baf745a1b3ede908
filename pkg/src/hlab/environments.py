"""Seeded samplers for the random-coefficient environments.

Three families, each producing per-site symmetric d x d coefficient matrices
a(x) with eigenvalues in a declared ellipticity window [lambda, Lambda]:

  * bernoulli          a(x) = (1 +- gamma) I with probability 1/2 each
  * iid_general        i.i.d. site matrices from a finite mixture or a
                       parametric isotropic family
  * massive_field      a(x) = a_tilde(phi(x)) for phi drawn from the massive
                       field-theory measure (see fieldtheory)
  * massless_gradient  a(x) = a_tilde(omega(x)) for a gradient field omega

Coefficient maps a_tilde come from a small named registry so that runs are
reproducible from config files alone; every map declares its output bounds
and a Lipschitz bound on its derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fieldtheory import (
    ConvexPotential,
    FieldSample,
    McmcControls,
    sample_massive_batch,
    sample_massless_gradient_batch,
)
from .lattice import TorusGrid
from .rng import sample_stream


@dataclass(frozen=True)
class EllipticityBounds:
    lam: float
    Lam: float

    def __post_init__(self) -> None:
        if not (0 < self.lam <= self.Lam):
            raise ValueError(
                f"ellipticity bounds need 0 < lambda <= Lambda, got "
                f"({self.lam}, {self.Lam})"
            )

    @property
    def contrast(self) -> float:
        return self.Lam / self.lam


@dataclass
class CoefficientField:
    """One sampled realization x -> a(x) on a torus."""

    grid: TorusGrid
    a: np.ndarray  # shape (d, d, L, ..., L), real symmetric per site
    bounds: EllipticityBounds
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        a = np.asarray(self.a, dtype=np.float64)
        want = (self.grid.dim, self.grid.dim) + self.grid.shape
        if a.shape != want:
            raise ValueError(f"coefficient shape {a.shape} != {want}")
        self.a = a

    def sitewise_eigenvalues(self) -> np.ndarray:
        """Eigenvalues per site, shape (L, ..., L, d)."""
        per_site = np.moveaxis(self.a, (0, 1), (-2, -1))
        sym = 0.5 * (per_site + np.swapaxes(per_site, -1, -2))
        return np.linalg.eigvalsh(sym)

    def check_bounds(self, tol: float = 1e-12) -> None:
        ev = self.sitewise_eigenvalues()
        lo, hi = float(ev.min()), float(ev.max())
        if lo < self.bounds.lam - tol or hi > self.bounds.Lam + tol:
            raise ValueError(
                f"coefficient eigenvalues [{lo}, {hi}] violate declared "
                f"bounds [{self.bounds.lam}, {self.bounds.Lam}]"
            )

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.a - np.swapaxes(self.a, 0, 1))))


# ---------------------------------------------------------------------------
# coefficient maps a_tilde


@dataclass(frozen=True)
class CoefficientMap:
    """Named pointwise map from field values to symmetric matrices.

    input_kind is "scalar" (phi environments) or "vector" (gradient
    environments); deriv_bound is a sup bound on |D a_tilde|.
    """

    name: str
    input_kind: str
    bounds: EllipticityBounds
    deriv_bound: float
    params: dict

    def apply(self, grid: TorusGrid, values: np.ndarray) -> np.ndarray:
        fn = _MAP_FUNCTIONS[self.name]
        out = fn(grid, np.asarray(values), self.params)
        return out


def _map_constant(grid: TorusGrid, values: np.ndarray, p: dict) -> np.ndarray:
    d = grid.dim
    out = np.zeros((d, d) + grid.shape)
    for j in range(d):
        out[j, j] = p["c"]
    return out


def _scalar_input(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    if values.shape == grid.shape:
        return values
    if values.shape == (grid.dim,) + grid.shape:
        # reduce a vector input to the normalized component sum
        return np.sum(values, axis=0) / np.sqrt(grid.dim)
    raise ValueError(f"unexpected field shape {values.shape}")


def _map_tanh_isotropic(grid: TorusGrid, values: np.ndarray, p: dict) -> np.ndarray:
    s = _scalar_input(grid, values)
    scale = p["base"] + p["amp"] * np.tanh(p["rate"] * s)
    d = grid.dim
    out = np.zeros((d, d) + grid.shape)
    for j in range(d):
        out[j, j] = scale
    return out


def _map_tanh_diagonal(grid: TorusGrid, values: np.ndarray, p: dict) -> np.ndarray:
    if values.shape != (grid.dim,) + grid.shape:
        raise ValueError("tanh_diagonal needs a vector field input")
    d = grid.dim
    out = np.zeros((d, d) + grid.shape)
    for j in range(d):
        out[j, j] = p["base"] + p["amp"] * np.tanh(p["rate"] * values[j])
    return out


_MAP_FUNCTIONS = {
    "constant_isotropic": _map_constant,
    "tanh_isotropic": _map_tanh_isotropic,
    "tanh_diagonal": _map_tanh_diagonal,
}


def make_coefficient_map(name: str, input_kind: str, **params) -> CoefficientMap:
    """Build a registry map, deriving its bounds and derivative bound."""
    if name == "constant_isotropic":
        c = float(params["c"])
        if c <= 0:
            raise ValueError(f"constant coefficient must be > 0, got {c}")
        return CoefficientMap(
            name, input_kind, EllipticityBounds(c, c), 0.0, {"c": c}
        )
    if name in ("tanh_isotropic", "tanh_diagonal"):
        base = float(params["base"])
        amp = float(params["amp"])
        rate = float(params["rate"])
        lo, hi = base - abs(amp), base + abs(amp)
        if lo <= 0:
            raise ValueError(
                f"map {name}: base - |amp| = {lo} must be > 0 for ellipticity"
            )
        if name == "tanh_diagonal" and input_kind != "vector":
            raise ValueError("tanh_diagonal is a vector-input map")
        return CoefficientMap(
            name,
            input_kind,
            EllipticityBounds(lo, hi),
            abs(amp) * rate,
            {"base": base, "amp": amp, "rate": rate},
        )
    raise ValueError(f"unknown coefficient map {name!r}")


# ---------------------------------------------------------------------------
# i.i.d. samplers


def sample_bernoulli(
    grid: TorusGrid, gamma: float, rng: np.random.Generator
) -> CoefficientField:
    """a(x) = (1 + gamma Y(x)) I with Y i.i.d. uniform on {-1, +1}."""
    if not 0 <= gamma < 1:
        raise ValueError(f"bernoulli contrast gamma must be in [0, 1), got {gamma}")
    signs = 2.0 * rng.integers(0, 2, size=grid.shape) - 1.0
    scale = 1.0 + gamma * signs
    d = grid.dim
    a = np.zeros((d, d) + grid.shape)
    for j in range(d):
        a[j, j] = scale
    bounds = EllipticityBounds(1.0 - gamma, 1.0 + gamma) if gamma > 0 else EllipticityBounds(1.0, 1.0)
    return CoefficientField(grid=grid, a=a, bounds=bounds)


def sample_iid_general(
    grid: TorusGrid, distribution: dict, rng: np.random.Generator
) -> CoefficientField:
    """i.i.d. site matrices from a finite mixture or an isotropic uniform law.

    distribution is either
      {"type": "mixture", "weights": [...], "matrices": [[[...]], ...]}
    with symmetric d x d support points, or
      {"type": "uniform_isotropic", "low": a, "high": b}
    meaning a(x) = u(x) I with u i.i.d. uniform on [a, b].
    """
    d = grid.dim
    kind = distribution.get("type")
    if kind == "mixture":
        weights = np.asarray(distribution["weights"], dtype=np.float64)
        mats = np.asarray(distribution["matrices"], dtype=np.float64)
        if mats.ndim != 3 or mats.shape[1:] != (d, d):
            raise ValueError(f"mixture matrices must be (k, {d}, {d}), got {mats.shape}")
        if weights.ndim != 1 or weights.size != mats.shape[0]:
            raise ValueError("mixture weights and matrices disagree in length")
        if np.any(weights < 0) or not np.isclose(weights.sum(), 1.0):
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if np.max(np.abs(mats - np.swapaxes(mats, 1, 2))) > 1e-12:
            raise ValueError("mixture support points must be symmetric matrices")
        ev = np.linalg.eigvalsh(mats)
        lam, Lam = float(ev.min()), float(ev.max())
        if lam <= 0:
            raise ValueError(
                f"mixture support violates ellipticity: min eigenvalue {lam} <= 0"
            )
        picks = rng.choice(mats.shape[0], size=grid.shape, p=weights)
        a = np.moveaxis(mats[picks], (-2, -1), (0, 1))
        return CoefficientField(grid=grid, a=np.ascontiguousarray(a), bounds=EllipticityBounds(lam, Lam))
    if kind == "uniform_isotropic":
        lo, hi = float(distribution["low"]), float(distribution["high"])
        if not 0 < lo <= hi:
            raise ValueError(f"uniform_isotropic needs 0 < low <= high, got [{lo}, {hi}]")
        u = rng.uniform(lo, hi, size=grid.shape)
        a = np.zeros((d, d) + grid.shape)
        for j in range(d):
            a[j, j] = u
        return CoefficientField(grid=grid, a=a, bounds=EllipticityBounds(lo, hi))
    raise ValueError(f"unknown iid distribution type {kind!r}")


# ---------------------------------------------------------------------------
# field-theory coefficient fields


def coeff_from_phi(
    sample: FieldSample, a_tilde: CoefficientMap, bounds: EllipticityBounds | None = None
) -> CoefficientField:
    """a(x) = a_tilde(phi(x)) for a scalar field sample."""
    if sample.phi is None:
        raise ValueError("sample carries no scalar field phi")
    if a_tilde.input_kind != "scalar":
        raise ValueError(f"map {a_tilde.name} does not take scalar input")
    bounds = a_tilde.bounds if bounds is None else bounds
    a = a_tilde.apply(sample.grid, sample.phi)
    out = CoefficientField(grid=sample.grid, a=a, bounds=bounds)
    out.check_bounds()
    return out


def coeff_from_gradient(
    sample: FieldSample, a_tilde: CoefficientMap, bounds: EllipticityBounds | None = None
) -> CoefficientField:
    """a(x) = a_tilde(omega(x)) for a gradient field sample."""
    if sample.omega is None:
        raise ValueError("sample carries no gradient field omega")
    if a_tilde.input_kind != "vector":
        raise ValueError(f"map {a_tilde.name} does not take vector input")
    bounds = a_tilde.bounds if bounds is None else bounds
    a = a_tilde.apply(sample.grid, sample.omega)
    out = CoefficientField(grid=sample.grid, a=a, bounds=bounds)
    out.check_bounds()
    return out


# ---------------------------------------------------------------------------
# environment spec and draw dispatch


_KINDS = ("bernoulli", "iid_general", "massive_field", "massless_gradient")


@dataclass(frozen=True)
class EnvironmentSpec:
    """Validated description of one environment, buildable from config."""

    kind: str
    gamma: float = 0.0
    distribution: dict | None = None
    potential: ConvexPotential | None = None
    mass: float = 0.0
    mcmc: McmcControls | None = None
    coefficient_map: CoefficientMap | None = None
    proxy_mass: float | None = None

    @property
    def bounds(self) -> EllipticityBounds:
        if self.kind == "bernoulli":
            if self.gamma == 0:
                return EllipticityBounds(1.0, 1.0)
            return EllipticityBounds(1.0 - self.gamma, 1.0 + self.gamma)
        if self.kind == "iid_general":
            return _iid_bounds(self.distribution)
        return self.coefficient_map.bounds

    def draw(self, grid: TorusGrid, master_seed: int, sample_index: int) -> CoefficientField:
        return self.draw_batch(grid, master_seed, [sample_index])[0]

    def draw_batch(
        self, grid: TorusGrid, master_seed: int, indices: list[int]
    ) -> list[CoefficientField]:
        """Coefficient fields for the given sample indices, in index order.

        Field-theory kinds run their chains vectorized across the batch; the
        per-index draws are identical however indices are grouped.
        """
        out: list[CoefficientField] = []
        if self.kind == "bernoulli":
            for i in indices:
                f = sample_bernoulli(grid, self.gamma, sample_stream(master_seed, i))
                f.provenance = self._provenance(master_seed, i)
                out.append(f)
        elif self.kind == "iid_general":
            for i in indices:
                f = sample_iid_general(grid, self.distribution, sample_stream(master_seed, i))
                f.provenance = self._provenance(master_seed, i)
                out.append(f)
        elif self.kind == "massive_field":
            samples = sample_massive_batch(
                grid, self.potential, self.mass, self.mcmc, master_seed, indices
            )
            for i, s in zip(indices, samples):
                f = coeff_from_phi(s, self.coefficient_map)
                f.provenance = self._provenance(master_seed, i, s.diagnostics)
                out.append(f)
        elif self.kind == "massless_gradient":
            samples = sample_massless_gradient_batch(
                grid, self.potential, self.mcmc, master_seed, indices,
                proxy_mass=self.proxy_mass,
            )
            for i, s in zip(indices, samples):
                f = coeff_from_gradient(s, self.coefficient_map)
                f.provenance = self._provenance(master_seed, i, s.diagnostics)
                out.append(f)
        else:
            raise ValueError(f"unknown environment kind {self.kind!r}")
        return out

    def _provenance(self, master_seed: int, index: int, diagnostics: dict | None = None) -> dict:
        p = {"kind": self.kind, "master_seed": int(master_seed), "sample_index": int(index)}
        if diagnostics is not None:
            p["mcmc"] = diagnostics
        return p


def _iid_bounds(distribution: dict | None) -> EllipticityBounds:
    if distribution is None:
        raise ValueError("iid_general environment needs a distribution table")
    kind = distribution.get("type")
    if kind == "mixture":
        mats = np.asarray(distribution["matrices"], dtype=np.float64)
        ev = np.linalg.eigvalsh(0.5 * (mats + np.swapaxes(mats, 1, 2)))
        return EllipticityBounds(float(ev.min()), float(ev.max()))
    if kind == "uniform_isotropic":
        return EllipticityBounds(float(distribution["low"]), float(distribution["high"]))
    raise ValueError(f"unknown iid distribution type {kind!r}")


def make_environment(raw: dict) -> EnvironmentSpec:
    """Validate a config mapping into an EnvironmentSpec.

    Raises ValueError with a key-path message on the first violated
    constraint (e.g. "environment.gamma: must be in [0, 1)").
    """
    kind = raw.get("kind")
    if kind not in _KINDS:
        raise ValueError(
            f"environment.kind: must be one of {_KINDS}, got {kind!r}"
        )
    if kind == "bernoulli":
        gamma = float(raw.get("gamma", 0.0))
        if not 0 <= gamma < 1:
            raise ValueError(
                f"environment.gamma: must be in [0, 1) so that a = (1 +- gamma) I "
                f"stays uniformly elliptic, got {gamma}"
            )
        return EnvironmentSpec(kind="bernoulli", gamma=gamma)
    if kind == "iid_general":
        dist = raw.get("distribution")
        try:
            _iid_bounds(dist)
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"environment.distribution: {exc}") from exc
        return EnvironmentSpec(kind="iid_general", distribution=dist)

    # field-theory kinds
    vraw = raw.get("potential", {})
    try:
        potential = ConvexPotential(
            kappa=float(vraw.get("kappa", 0.0)), beta=float(vraw.get("beta", 1.0))
        )
    except ValueError as exc:
        raise ValueError(f"environment.potential: {exc}") from exc
    mraw = raw.get("mcmc", {})
    mcmc = McmcControls(
        burn_in=mraw.get("burn_in"),
        thinning=mraw.get("thinning"),
        step_init=float(mraw.get("step_init", 0.05)),
        target_accept=float(mraw.get("target_accept", 0.574)),
        adapt=bool(mraw.get("adapt", True)),
    )
    cmraw = raw.get("coefficient_map")
    if cmraw is None:
        raise ValueError("environment.coefficient_map: required for field-theory kinds")
    input_kind = "scalar" if kind == "massive_field" else "vector"
    try:
        cmap = make_coefficient_map(
            cmraw["name"], input_kind,
            **{k: v for k, v in cmraw.items() if k != "name"},
        )
    except (KeyError, ValueError) as exc:
        raise ValueError(f"environment.coefficient_map: {exc}") from exc

    if kind == "massive_field":
        mass = float(raw.get("mass", 0.0))
        if mass <= 0:
            raise ValueError(f"environment.mass: must be > 0, got {mass}")
        return EnvironmentSpec(
            kind=kind, potential=potential, mass=mass, mcmc=mcmc,
            coefficient_map=cmap,
        )
    proxy = raw.get("proxy_mass")
    return EnvironmentSpec(
        kind=kind, potential=potential, mcmc=mcmc, coefficient_map=cmap,
        proxy_mass=None if proxy is None else float(proxy),
    )


def constant_environment(c: float) -> EnvironmentSpec:
    """Point mass at c I, as an iid_general environment."""
    return EnvironmentSpec(
        kind="iid_general",
        distribution={"type": "uniform_isotropic", "low": float(c), "high": float(c)},
    )


def bernoulli_environment(gamma: float) -> EnvironmentSpec:
    return make_environment({"kind": "bernoulli", "gamma": gamma})
