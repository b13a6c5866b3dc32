"""Adaptive simulated annealing with reannealing and quenching.

Also ships Boltzmann and fast-annealing baselines, benchmark landscapes and
a multi-seed benchmark harness. Set ``ASAOPT_DISABLE_NUMBA=1`` to run the
numeric kernels through numpy only.
"""
from ._accel import BACKEND, USE_NUMBA
from .core import (
    AnnealerState,
    Candidate,
    CostFunctionError,
    CurvatureReport,
    ParameterSpec,
    ProblemSpec,
    RunConfig,
    RunReport,
    accept_step,
    curvature_diagnostics,
    generate_candidate,
    init_run,
    run,
)
from .distributions import AcceptanceForm, DomainError, acceptance_probability
from .harness import BenchSummary, ConfigError, MetaConfig, bench, emit_report, parse_config, self_optimize
from .schedules import ScheduleParams
from .testfns import catalog

__all__ = [
    "BACKEND",
    "USE_NUMBA",
    "AcceptanceForm",
    "AnnealerState",
    "BenchSummary",
    "Candidate",
    "ConfigError",
    "CostFunctionError",
    "CurvatureReport",
    "DomainError",
    "MetaConfig",
    "ParameterSpec",
    "ProblemSpec",
    "RunConfig",
    "RunReport",
    "ScheduleParams",
    "accept_step",
    "acceptance_probability",
    "bench",
    "catalog",
    "curvature_diagnostics",
    "emit_report",
    "generate_candidate",
    "init_run",
    "parse_config",
    "run",
    "self_optimize",
]
