"""aojc: age-of-job-completion scheduling toolkit.

Simulator, closed-form analytics, stability checks and policy optimization
for a slotted system where a single Markov machine serves N user queues and
the controller pays to sample the machine state.
"""

__version__ = "0.1.0"

from .analytics import (
    ClosedFormReport,
    UserCountMode,
    acquisition_moments,
    chi,
    closed_form_report,
    free_find_prob,
    maxage_age,
    maxage_sampling_cost,
    maxage_total_cost,
    randomized_age,
    randomized_ages,
    randomized_sampling_bound,
    randomized_total_cost,
)
from .model import (
    AdaptivePolicy,
    ParamError,
    PolicyError,
    RngStreams,
    SchedulerKind,
    SubsetPolicy,
    SystemParams,
    active_set,
    enumerate_subsets,
    full_mask,
    subset_label,
    subset_mask,
    subset_members,
    subset_size,
    uniform_policy,
    validate_params,
)
from .optimizer import (
    OptimizationError,
    OptimizerSettings,
    OptResult,
    build_maxage_policy,
    build_randomized_policy,
    load_policy,
    optimize_maxage_subset,
    optimize_randomized_subset,
    save_policy,
)
from .simulator import (
    DriftReport,
    DriftThresholds,
    SimMetrics,
    SimState,
    drift_diagnostic,
    initial_state,
    max_age_select,
    run,
    step,
)
from .stability import (
    StabilityReport,
    WorstCaseReport,
    maxage_stability_check,
    randomized_stability_check,
    sufficiency_sweep,
    worstcase_stability_check,
)

__all__ = [
    "__version__",
    "AdaptivePolicy", "ParamError", "PolicyError", "RngStreams", "SchedulerKind",
    "SubsetPolicy", "SystemParams", "active_set", "enumerate_subsets", "full_mask",
    "subset_label", "subset_mask", "subset_members", "subset_size", "uniform_policy",
    "validate_params",
    "ClosedFormReport", "UserCountMode", "acquisition_moments", "chi",
    "closed_form_report", "free_find_prob", "maxage_age", "maxage_sampling_cost",
    "maxage_total_cost", "randomized_age", "randomized_ages",
    "randomized_sampling_bound", "randomized_total_cost",
    "OptimizationError", "OptimizerSettings", "OptResult", "build_maxage_policy",
    "build_randomized_policy", "load_policy", "optimize_maxage_subset",
    "optimize_randomized_subset", "save_policy",
    "DriftReport", "DriftThresholds", "SimMetrics", "SimState", "drift_diagnostic",
    "initial_state", "max_age_select", "run", "step",
    "StabilityReport", "WorstCaseReport", "maxage_stability_check",
    "randomized_stability_check", "sufficiency_sweep", "worstcase_stability_check",
]
