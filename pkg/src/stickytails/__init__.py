"""Exact tail asymptotics and Monte Carlo verification for stationary laws
of two-dimensional sticky reflecting Brownian motions.

Analytic side: kernel branch geometry, dominant-singularity candidates,
and the case tables giving decay rates and power prefactors for boundary,
marginal, and directional survival functions, plus Gumbel norming
constants for block maxima.  Simulation side: an Euler-complementarity
scheme for the reflected path with exact local-time accounting and the
sticky clock, streaming estimators for every analytically checkable
quantity, and tail/extreme-value fits.
"""

from .classify import (
    DirectionalQuery,
    TailAsymptotic,
    classify_boundary,
    classify_direction,
    classify_marginal,
    joint_tail_params,
)
from .extremes import (
    EvNorming,
    JointTailModel,
    ev_norming,
    gumbel_cdf,
    independence_diagnostic,
    joint_tail_eval,
)
from .kernel import (
    BranchPoints,
    KernelForm,
    SingularityCandidates,
    branch_points,
    face_polys,
    find_x_star,
    find_y_star_x_tilde,
    kernel_eval,
    singularity_candidates,
    x_branch,
    y_branch,
)
from .model import (
    LocalTimeRates,
    ModelParams,
    levy_exponent,
    local_time_rates,
    make_model,
    validate,
)
from .simulate import (
    SimConfig,
    SrbmPath,
    bar_residual,
    estimate_local_time_rates,
    occupation_measure,
    reflect_step,
    run_engine,
    simulate_srbm,
    sticky_clock_invert,
)

__version__ = "0.1.0"

__all__ = [
    "BranchPoints",
    "DirectionalQuery",
    "EvNorming",
    "JointTailModel",
    "KernelForm",
    "LocalTimeRates",
    "ModelParams",
    "SimConfig",
    "SingularityCandidates",
    "SrbmPath",
    "TailAsymptotic",
    "bar_residual",
    "branch_points",
    "classify_boundary",
    "classify_direction",
    "classify_marginal",
    "estimate_local_time_rates",
    "ev_norming",
    "face_polys",
    "find_x_star",
    "find_y_star_x_tilde",
    "gumbel_cdf",
    "independence_diagnostic",
    "joint_tail_eval",
    "joint_tail_params",
    "kernel_eval",
    "levy_exponent",
    "local_time_rates",
    "make_model",
    "occupation_measure",
    "reflect_step",
    "run_engine",
    "simulate_srbm",
    "singularity_candidates",
    "sticky_clock_invert",
    "validate",
    "x_branch",
    "y_branch",
]
