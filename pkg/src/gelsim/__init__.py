"""gelsim: finite-mass stochastic coagulation and its mean-field limits.

Exact event-driven simulation of the pairwise coagulation Markov chain,
gelation stopping-time observables, a truncated mean-field ODE solver
with gel-mass accounting, explicit theorem constants, and a small-N
exact-chain oracle.
"""

from ._core import HAVE_NUMBA
from .bounds import bound_curves, bound_shape, jeon_constants, sbar_etabar, theorem13_bound
from .config import ConfigError, ExperimentConfig, load_experiment
from .engine import (
    AbsorbedStateError,
    EventRecord,
    RandomStream,
    RateAccount,
    StopCondition,
    run_trajectory,
    sample_event,
    total_rate,
    total_rate_direct,
)
from .harness import EnsembleSummary, compare_mlp_ode, fit_scaling_means, run_ensemble
from .kernel import (
    HypothesisReport,
    KernelSpec,
    LimitRatio,
    additive_kernel,
    constant_kernel,
    evaluate,
    hypothesis_check,
    mixed_kernel,
    product_kernel,
    sum_kernel,
    table_kernel,
)
from .observables import (
    ObservableRecord,
    ObservableSet,
    SeriesConfig,
    StoppingTimeSpec,
    check_after_event,
    ladder_schedule,
    largest_cluster,
)
from .oracle import PartitionChain, build_chain, expected_hitting_time, marginal_at_time
from .smoluchowski import OdeConfig, OdeResult, OdeState, integrate, rhs
from .state import ClusterState, init_from_profile, init_monodisperse

__version__ = "0.1.0"
