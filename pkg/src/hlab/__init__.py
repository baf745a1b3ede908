"""Lattice stochastic-homogenization laboratory.

Computes averaged Green's functions of eta + grad* a grad on the discrete
torus for random coefficient fields, the effective symbol q(xi, eta) by
corrector and contraction-series routes, homogenized kernels, cutoff
decompositions, and decay/continuity fits, with a reproducible CLI and a
built-in verification battery.
"""

from .environments import (
    CoefficientField,
    EllipticityBounds,
    EnvironmentSpec,
    bernoulli_environment,
    constant_environment,
    make_coefficient_map,
    make_environment,
)
from .effective import (
    EffectiveSymbol,
    HolderScanReport,
    extrapolate_q00,
    holder_scan,
    q_of_xi_eta,
    q_via_series,
)
from .greens import (
    AveragedGreenResult,
    CutoffSpec,
    DecayFitReport,
    GreensTable,
    averaged_green,
    cutoff_smooth,
    decay_fit,
    difference_tables,
    homogenized_green,
)
from .lattice import TorusGrid, constant_coeff_green
from .solver import (
    CorrectorSolution,
    SolveControls,
    apply_T,
    solve_corrector_direct,
    solve_corrector_neumann,
    solve_elliptic,
)
from .verify import CheckResult, run_battery, run_check

__version__ = "0.1.0"

__all__ = [
    "AveragedGreenResult",
    "CheckResult",
    "CoefficientField",
    "CorrectorSolution",
    "CutoffSpec",
    "DecayFitReport",
    "EffectiveSymbol",
    "EllipticityBounds",
    "EnvironmentSpec",
    "GreensTable",
    "HolderScanReport",
    "SolveControls",
    "TorusGrid",
    "apply_T",
    "averaged_green",
    "bernoulli_environment",
    "constant_coeff_green",
    "constant_environment",
    "cutoff_smooth",
    "decay_fit",
    "difference_tables",
    "extrapolate_q00",
    "holder_scan",
    "homogenized_green",
    "make_coefficient_map",
    "make_environment",
    "q_of_xi_eta",
    "q_via_series",
    "run_battery",
    "run_check",
    "solve_corrector_direct",
    "solve_corrector_neumann",
    "solve_elliptic",
    "__version__",
]
