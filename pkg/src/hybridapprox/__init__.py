"""Linear and non-linear approximation in hybrid-smoothness sequence spaces."""

__version__ = "0.1.0"

from .approximators import (
    ApproxResult,
    LinearPlan,
    NonlinearPlan,
    apply_linear,
    apply_nonlinear,
    dof_of,
    make_linear_plan,
    make_nonlinear_plan,
    weighted_rearrangement,
)
from .errors import (
    ConfigError,
    FitError,
    HybridError,
    InfeasibleError,
    InfiniteSetError,
    ParameterError,
    PreconditionError,
    ResourceError,
    UseLinearInstead,
)
from .index_domain import (
    DomainConfig,
    Index,
    LayerPartition,
    enumerate_delta,
    enumerate_layer,
    enumerate_nabla_mu,
    enumerate_shifts,
    layer_decay_sum,
    layer_partition,
    weighted_level_sum,
)
from .rates import RateReport, SweepConfig, fit_slope, predicted_rates, run_sweep, run_sweeps
from .sequence import HybridSequence, load_sequence
from .spaces import SpaceParams, Verdict, b_quasinorm, check_embedding, f_quasinorm, quasinorm
from .verify import verify_suite
from .widths_lab import (
    FoolingSpec,
    WidthEstimate,
    exhaustive_best_m,
    fooling_sequence,
    projection_error,
    stechkin_check,
    stechkin_select,
    stress_family,
)
