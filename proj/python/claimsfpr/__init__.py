"""Python bindings for the claimsfpr C++ library."""

from ._claimsfpr import (
    Error,
    apparent_proportion,
    correct_proportion,
    default_age_grid,
    empirical_quantiles,
    integrate_characteristic,
    link_forward,
    link_inverse,
    pde_rhs,
    run_pipeline,
    sample_sensitivities,
    solve_specificity,
    specificity_residual,
    write_reference_scenario,
)

__all__ = [
    "Error",
    "apparent_proportion",
    "correct_proportion",
    "default_age_grid",
    "empirical_quantiles",
    "integrate_characteristic",
    "link_forward",
    "link_inverse",
    "pde_rhs",
    "run_pipeline",
    "sample_sensitivities",
    "solve_specificity",
    "specificity_residual",
    "write_reference_scenario",
]
