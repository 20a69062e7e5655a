"""Two-level emitter coupled to dispersive wave fields.

Library layout:
    coupling    -- shapes sigma, radial quadrature, kappa family, potential Gamma
    stationary  -- stationary branches, multipliers, reduced energy landscape
    spectral    -- discretized linearization operators and their spectra
    counting    -- inertia/Krein counts and stability verdicts
    dispersion  -- complex dispersion relation and the Plemelj boundary values
    dynamics    -- symplectic/exact-split time stepping and conservation reports
    instability -- orbit projections, growth-rate and escape-time experiments
    cli         -- scenario driver (branches/simulate/spectrum/count/... subcommands)
"""

from .coupling import (
    CouplingShape,
    KappaFamily,
    RadialGrid,
    calibrate_amplitude,
    compute_kappa,
    default_grid,
    gamma_potential,
    kappa_complex,
    kappa_gamma,
    make_shape,
)

__all__ = [
    "CouplingShape",
    "KappaFamily",
    "RadialGrid",
    "calibrate_amplitude",
    "compute_kappa",
    "default_grid",
    "gamma_potential",
    "kappa_complex",
    "kappa_gamma",
    "make_shape",
]
