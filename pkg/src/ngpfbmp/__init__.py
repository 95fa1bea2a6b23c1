"""Sparse recovery by greedy Bayesian matching pursuit with an amplitude-agnostic prior.

The dominant supports are found by a repeated greedy search whose metric
is updated order-recursively; the estimate is the posterior-weighted mix
of the per-support least-squares fits.
"""

from .baselines import exhaustive_map, exhaustive_mmse, omp_recover
from .datagen import SignalModel, add_noise, gen_matrix, gen_signal
from .errors import (
    DomainError,
    EmptySet,
    NearSingular,
    NgpfbmpError,
    RankDeficient,
    TooLarge,
    ZeroColumn,
)
from .estimator import (
    RecoveryResult,
    ammse_estimate,
    estimate_hyperparameters,
    map_estimate,
    posterior_weights,
    recover,
)
from .model import (
    ProblemInstance,
    SparseSignal,
    blue_estimate,
    log_support_prior,
    metric_direct,
    nmse,
    residual_energy,
)
from .search import DominantSet, SearchConfig, compute_support_budget, greedy_pass, repeated_search

__version__ = "0.1.0"
