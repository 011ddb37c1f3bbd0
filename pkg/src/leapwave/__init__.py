"""Leapfrog finite element solver and a posteriori error estimator for the 1D wave equation."""

from leapwave.benchmarks import (
    PropagatingWaveCase,
    StandingWaveCase,
    half_gaussian_laplace,
    make_propagating,
    make_standing,
)
from leapwave.damped_norms import (
    DampedAccumulator,
    ErrorMeasures,
    SeparableSolution,
    StreamingMeasures,
    damped_energy_norm,
    damped_time_integral,
    error_measures,
    load_dual_norms_sq,
)
from leapwave.estimator import (
    EstimatorBreakdown,
    data_oscillation,
    estimator_M,
    estimator_R,
    gamma_bound,
    modified_residual_pairing,
    residual_pairing,
    sigma_flux,
    total_estimator,
)
from leapwave.fem1d import (
    BandedSymmetricOperator,
    LagrangeSpace,
    QuadratureRule,
    UniformMesh1D,
    assemble_mass,
    assemble_stiffness,
    evaluate,
    gauss_rule,
    load_vector,
    solve_spd,
    spatial_norms,
)
from leapwave.harness import (
    RunConfig,
    RunRecord,
    cfl_alpha,
    derived_tau,
    emit_csv,
    rate_table,
    read_csv,
    run_experiment,
    sweep,
)
from leapwave.reconstruct import (
    SourceReconstruction,
    TimeReconstruction,
    continuity_jumps,
    delta,
    l_time_stencil,
    r_time_stencil,
    reconstruct_L,
    reconstruct_R,
    verify_commuting,
    verify_reconstructed_equation,
)
from leapwave.special import dawson, erf, erf_real, faddeeva_w
from leapwave.timestepping import (
    CflCheck,
    DiscreteEnergyTrace,
    StabilityCheck,
    StateSequence,
    TimeGrid,
    acceleration_stability_constant,
    check_damped_stability,
    difference_sequences,
    discrete_energy_trace,
    find_cfl_alpha,
    mht_form,
    run_leapfrog,
    stability_constant,
    third_difference_stability_constant,
    verify_cfl,
)

__all__ = [
    "BandedSymmetricOperator",
    "CflCheck",
    "DampedAccumulator",
    "DiscreteEnergyTrace",
    "ErrorMeasures",
    "EstimatorBreakdown",
    "LagrangeSpace",
    "PropagatingWaveCase",
    "QuadratureRule",
    "RunConfig",
    "RunRecord",
    "SeparableSolution",
    "SourceReconstruction",
    "StabilityCheck",
    "StandingWaveCase",
    "StateSequence",
    "StreamingMeasures",
    "TimeGrid",
    "TimeReconstruction",
    "UniformMesh1D",
    "acceleration_stability_constant",
    "assemble_mass",
    "assemble_stiffness",
    "cfl_alpha",
    "check_damped_stability",
    "continuity_jumps",
    "damped_energy_norm",
    "damped_time_integral",
    "data_oscillation",
    "dawson",
    "delta",
    "derived_tau",
    "difference_sequences",
    "discrete_energy_trace",
    "emit_csv",
    "erf",
    "erf_real",
    "error_measures",
    "estimator_M",
    "estimator_R",
    "evaluate",
    "faddeeva_w",
    "find_cfl_alpha",
    "gamma_bound",
    "gauss_rule",
    "half_gaussian_laplace",
    "l_time_stencil",
    "load_dual_norms_sq",
    "load_vector",
    "make_propagating",
    "make_standing",
    "mht_form",
    "modified_residual_pairing",
    "r_time_stencil",
    "rate_table",
    "read_csv",
    "reconstruct_L",
    "reconstruct_R",
    "residual_pairing",
    "run_experiment",
    "run_leapfrog",
    "sigma_flux",
    "solve_spd",
    "spatial_norms",
    "stability_constant",
    "sweep",
    "third_difference_stability_constant",
    "total_estimator",
    "verify_cfl",
    "verify_commuting",
    "verify_reconstructed_equation",
]
