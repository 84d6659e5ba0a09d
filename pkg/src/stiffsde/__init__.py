"""Implicit Euler-Maruyama integrators for SDEs whose coefficients grow
super-linearly, plus the experiment harness that checks convergence,
divergence, moment bounds, and long-horizon stability at desk scale."""

__version__ = "0.1.0"

from .analysis import (BoundReport, ConditionAudit, ProbeSpec,
                       audit_catalog_entry, audit_condition, estimate_profile,
                       exit_probability_bound, scheme_second_moment_bound,
                       solution_second_moment_bound, state_norm_bound)
from .errors import ConfigError, DomainError, SolverError, StiffSdeError
from .experiments import (DivergenceReport, MomentBoundReport,
                          StabilityReport, StrongErrorReport, divergence_demo,
                          first_exit_step, fit_loglog_slope,
                          moment_bound_study, stability_study,
                          strong_error_study)
from .models import (ModelCatalogEntry, MonotoneProfile, SdeModel,
                     build_entry, catalog_defaults, catalog_labels,
                     make_ait_sahalia_model, make_cubic_model,
                     make_dissipative_model, make_electricity_model,
                     make_lotka_volterra_model)
from .noise import (BrownianGrid, TimePartition, coarsen, generate,
                    generate_increments, pairwise_group_sum, pairwise_sum)
from .schemes import (BLOWUP_NORM, PathState, SchemeConfig, Trajectory,
                      check_step_admissibility, explicit_em_step,
                      max_admissible_dt, run_path, run_path_batch,
                      split_theta_em_step, theta_em_step)
from .solvers import (SolveOutcome, SolverConfig, solve_cubic_closed_form,
                      solve_implicit)

__all__ = [
    "__version__",
    "StiffSdeError", "ConfigError", "DomainError", "SolverError",
    "SdeModel", "MonotoneProfile", "ModelCatalogEntry",
    "make_cubic_model", "make_electricity_model", "make_lotka_volterra_model",
    "make_ait_sahalia_model", "make_dissipative_model",
    "build_entry", "catalog_labels", "catalog_defaults",
    "TimePartition", "BrownianGrid", "generate", "generate_increments",
    "coarsen", "pairwise_sum", "pairwise_group_sum",
    "SolverConfig", "SolveOutcome", "solve_implicit", "solve_cubic_closed_form",
    "SchemeConfig", "PathState", "Trajectory", "BLOWUP_NORM",
    "explicit_em_step", "theta_em_step", "split_theta_em_step",
    "run_path", "run_path_batch", "check_step_admissibility",
    "max_admissible_dt",
    "ProbeSpec", "ConditionAudit", "BoundReport",
    "audit_condition", "audit_catalog_entry", "estimate_profile",
    "solution_second_moment_bound", "exit_probability_bound",
    "state_norm_bound", "scheme_second_moment_bound",
    "StrongErrorReport", "strong_error_study",
    "DivergenceReport", "divergence_demo",
    "MomentBoundReport", "moment_bound_study",
    "StabilityReport", "stability_study",
    "first_exit_step", "fit_loglog_slope",
]
