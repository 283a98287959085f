"""Fokker-Planck flows, score fields, controlled time reversals and relative entropy for 1-D Langevin diffusions."""

from ._entroflow import (
    ConfigError,
    ControlPolicy,
    DensityField,
    EntroflowError,
    GibbsMeasure,
    Grid,
    PathEnsemble,
    Potential,
    ScoreField,
    build_score,
    dissipation_check,
    ergodic_occupation,
    expected_cost,
    fisher_information,
    gaussian_slice,
    relative_entropy,
    run,
    run_config,
    run_iteration,
    sample_from_slice,
    set_threads,
    simulate_forward,
    simulate_reversed,
    solve_fokker_planck,
    subcommands,
    total_variation,
    version,
)

__version__ = version()
__all__ = [name for name in dir() if not name.startswith("_")]
