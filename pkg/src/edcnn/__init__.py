"""Expansive 1-D convolutional ReLU networks with max-pooling.

Exact convolution/Toeplitz/pooling primitives, factorization of long filters
into short ones, compilation of dense ReLU networks into functionally
identical pooled conv nets, least-squares training, and rate experiments.
"""

__version__ = "0.1.0"

from .conv import (
    Filter,
    PoolParams,
    conv_classic,
    conv_padded,
    max_pool,
    pmax,
    relu,
    toeplitz_matrix,
)
from .factorize import (
    FactorizationResult,
    NumericalError,
    factorize_filter,
    pad_with_deltas,
    reconstruct,
)
from .nets import (
    ConvLayer,
    DFCN,
    PooledEDCNN,
    SmoothnessSpec,
    deserialize,
    eval_classic_dcnn,
    eval_dfcn,
    eval_edcnn,
    eval_edcnn_batch,
    param_count,
    pool_schedule,
    serialize,
    truncate,
)
from .compiler import (
    AffineBlock,
    BiasSchedule,
    CompileReport,
    bias_bounds,
    chain_affine_identity,
    compile_block,
    compile_dfcn,
    stack_rows,
)
from .train import (
    Dataset,
    TrainConfig,
    TrainedModel,
    empirical_risk,
    erm_train,
    excess_risk,
    grad_empirical_risk,
)
from .targets import SmoothTarget, builtin_targets, target_by_name
from .experiments import (
    ExperimentConfig,
    RateTable,
    RateRow,
    approx_rate_run,
    depth_rule,
    learn_rate_run,
    slope_fit,
)

__all__ = [
    "AffineBlock",
    "BiasSchedule",
    "CompileReport",
    "ConvLayer",
    "DFCN",
    "Dataset",
    "ExperimentConfig",
    "FactorizationResult",
    "Filter",
    "NumericalError",
    "PoolParams",
    "PooledEDCNN",
    "RateRow",
    "RateTable",
    "SmoothTarget",
    "SmoothnessSpec",
    "TrainConfig",
    "TrainedModel",
    "approx_rate_run",
    "bias_bounds",
    "builtin_targets",
    "chain_affine_identity",
    "compile_block",
    "compile_dfcn",
    "conv_classic",
    "conv_padded",
    "depth_rule",
    "deserialize",
    "empirical_risk",
    "erm_train",
    "eval_classic_dcnn",
    "eval_dfcn",
    "eval_edcnn",
    "eval_edcnn_batch",
    "excess_risk",
    "factorize_filter",
    "grad_empirical_risk",
    "learn_rate_run",
    "max_pool",
    "pad_with_deltas",
    "param_count",
    "pmax",
    "pool_schedule",
    "reconstruct",
    "relu",
    "serialize",
    "slope_fit",
    "stack_rows",
    "target_by_name",
    "toeplitz_matrix",
    "truncate",
]
