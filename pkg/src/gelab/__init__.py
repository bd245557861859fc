"""gelab: a numerical laboratory for coagulation with diagonal-vanishing
kernels of homogeneity above one.

Deterministic finite-volume and stochastic particle solvers, measure-level
functionals, and the diagnostics used to probe finite-size gelation.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DomainError,
    EmptyMeasureError,
    GelabError,
    IndeterminateError,
    InsufficientDataError,
    ReportError,
    SeparationUndecidedError,
    StepRejectedError,
    UnsupportedFormError,
)
from .kernels import (
    Kernel,
    KernelParams,
    SamplingSpec,
    certify_assumption,
    homogeneity_degree,
)
from .measures import (
    Grid,
    SeparatedPair,
    SingleAtom,
    SizeDistribution,
    ball_mass,
    cutoff_pair,
    distribution_from_csv,
    distribution_to_csv,
    find_separated_mass_pair,
    from_atoms,
    from_density,
    moment,
    moment_root_inequality_check,
    truncated_moment,
)
from .initial import InitSpec
from .solver_fv import (
    FvConfig,
    FvTables,
    HatOnBall,
    PowerTruncated,
    Trajectory,
    build_grid,
    step,
    trajectory_to_csv,
    weak_form_residual,
)
from .solver_fv import run as run_sectional
from .solver_mc import (
    EnsembleResult,
    EventLog,
    detect_gelation,
    ensemble_gelation,
    ensemble_to_csv,
    event_log_to_csv,
    replica_rng,
    simulate,
)
from .diagnostics import (
    BlowupBound,
    CascadeProbe,
    TailFit,
    blowup_time_bound,
    fit_exponential_tail,
    gelation_time_from_series,
    positivity_cascade_probe,
    tail_decay_fit,
)

__all__ = [
    "__version__",
    "ConfigError",
    "DomainError",
    "EmptyMeasureError",
    "GelabError",
    "IndeterminateError",
    "InsufficientDataError",
    "ReportError",
    "SeparationUndecidedError",
    "StepRejectedError",
    "UnsupportedFormError",
    "Kernel",
    "KernelParams",
    "SamplingSpec",
    "certify_assumption",
    "homogeneity_degree",
    "Grid",
    "SeparatedPair",
    "SingleAtom",
    "SizeDistribution",
    "ball_mass",
    "cutoff_pair",
    "distribution_from_csv",
    "distribution_to_csv",
    "find_separated_mass_pair",
    "from_atoms",
    "from_density",
    "moment",
    "moment_root_inequality_check",
    "truncated_moment",
    "InitSpec",
    "FvConfig",
    "FvTables",
    "HatOnBall",
    "PowerTruncated",
    "Trajectory",
    "build_grid",
    "run_sectional",
    "step",
    "trajectory_to_csv",
    "weak_form_residual",
    "EnsembleResult",
    "EventLog",
    "detect_gelation",
    "ensemble_gelation",
    "ensemble_to_csv",
    "event_log_to_csv",
    "replica_rng",
    "simulate",
    "BlowupBound",
    "CascadeProbe",
    "TailFit",
    "blowup_time_bound",
    "fit_exponential_tail",
    "gelation_time_from_series",
    "positivity_cascade_probe",
    "tail_decay_fit",
]
