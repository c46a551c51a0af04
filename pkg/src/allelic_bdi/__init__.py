"""Birth-death-immigration dynamics on allelic partitions.

A three-parameter (alpha, theta, mu) continuous-time Markov chain on
multiplicity vectors, with exact Ewens/Pitman sampling-formula evaluators,
its reversible stationary laws in the mu > 1 regime, urn samplers, three
simulation engines and Monte Carlo diagnostics.
"""

__version__ = "0.1.0"

from .errors import (
    BoundExceededError,
    DomainError,
    InapplicableEventError,
    PartitionParseError,
    RunawayError,
)
from .partitions import (
    MAX_ENUMERATION_SIZE,
    AllelicPartition,
    EventKind,
    TransitionEvent,
    enumerate_partitions,
)
from .formulae import (
    ModelParams,
    SignedLogValue,
    alpha_weight,
    esf,
    log_alpha_weight,
    log_ascending_factorial,
    log_factorial,
    nbin_time_param,
    neg_bin_pmf,
    poisson_pmf,
    poisson_product_prob,
    psf,
)
from .urn import (
    default_checkpoints,
    group_count_trace,
    sample_psf,
    urn_step_distribution,
)
from .ctmc import (
    DEFAULT_MAX_EVENTS,
    AgentPopulation,
    SizeTrajectory,
    Trajectory,
    rates,
    simulate,
    simulate_bdi,
    simulate_branching,
    size_process_rates,
    write_trajectory_csv,
)
from .stationary import (
    PARTITION_BALANCE_MAX_SIZE,
    BalanceScan,
    TruncatedDistribution,
    alpha0_limit_rate,
    alpha0_marginal,
    conditional_given_size,
    mixture_consistency_scan,
    normalizing_constant,
    partition_balance_scan,
    partition_detailed_balance_residual,
    partition_stationary_pmf,
    partition_stationary_truncated,
    partition_stationary_via_mixture,
    size_balance_scan,
    size_detailed_balance_residual,
    size_stationary_log_range,
    size_stationary_pmf,
    stationary_mass_comparison,
    weight_series_gap,
)
from .montecarlo import (
    EmpiricalDistribution,
    GrowthRow,
    growth_report,
    run_ensemble,
    stationary_occupation,
    tv_distance,
    write_growth_csv,
    write_histogram_csv,
)

__all__ = [
    "__version__",
    "AgentPopulation",
    "AllelicPartition",
    "BalanceScan",
    "BoundExceededError",
    "DEFAULT_MAX_EVENTS",
    "DomainError",
    "EmpiricalDistribution",
    "EventKind",
    "GrowthRow",
    "InapplicableEventError",
    "MAX_ENUMERATION_SIZE",
    "ModelParams",
    "PARTITION_BALANCE_MAX_SIZE",
    "PartitionParseError",
    "RunawayError",
    "SignedLogValue",
    "SizeTrajectory",
    "Trajectory",
    "TransitionEvent",
    "TruncatedDistribution",
    "alpha0_limit_rate",
    "alpha0_marginal",
    "alpha_weight",
    "conditional_given_size",
    "default_checkpoints",
    "enumerate_partitions",
    "esf",
    "group_count_trace",
    "growth_report",
    "log_alpha_weight",
    "log_ascending_factorial",
    "log_factorial",
    "mixture_consistency_scan",
    "nbin_time_param",
    "neg_bin_pmf",
    "normalizing_constant",
    "partition_balance_scan",
    "partition_detailed_balance_residual",
    "partition_stationary_pmf",
    "partition_stationary_truncated",
    "partition_stationary_via_mixture",
    "poisson_pmf",
    "poisson_product_prob",
    "psf",
    "rates",
    "run_ensemble",
    "sample_psf",
    "simulate",
    "simulate_bdi",
    "simulate_branching",
    "size_balance_scan",
    "size_detailed_balance_residual",
    "size_process_rates",
    "size_stationary_log_range",
    "size_stationary_pmf",
    "stationary_mass_comparison",
    "stationary_occupation",
    "tv_distance",
    "urn_step_distribution",
    "weight_series_gap",
    "write_growth_csv",
    "write_histogram_csv",
    "write_trajectory_csv",
]
