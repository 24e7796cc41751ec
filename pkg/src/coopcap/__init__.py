"""Erasure multiple-access channels whose two-sender sum capacity jumps
when a tiny-rate cooperation facilitator is added.

The pipeline: sample a 2^m x 2^m erasure pattern whose aligned blocks all
contain a good entry (channel), run the zero-error facilitator code and
the single-sender fallback on it (coding), estimate the best
no-facilitator sum rate over product inputs (capacity), and compare
against the closed-form inner/outer bounds (bounds). experiments sweeps
widths and persists records; cli exposes everything as subcommands.
"""

from .bounds import (
    BoundSequences,
    FailureBounds,
    GapBounds,
    HyperbolaRegion,
    RateRegion,
    bound_sequences,
    cf_inner_region,
    cf_outer_region,
    construction_failure_bounds,
    hull_max_sum,
    ie_inner_sum,
    ie_outer_sum,
    ie_outer_sum_asymptotic,
    numeric_hull_max,
    theorem_gap,
)
from .capacity import (
    AltMaxResult,
    BruteForceResult,
    OutputStats,
    ProbVector,
    RateTriple,
    UniformDecomposition,
    alternating_maximization,
    as_distribution,
    brute_force_sum_capacity,
    decompose_into_uniforms,
    entropy_bits,
    maximize_sum_rate,
    output_stats,
    project_to_simplex,
    rate_triple,
    sum_rate,
    tail_mass_bound,
    xlog2x,
)
from .channel import (
    ERASURE,
    BlockCheckResult,
    Channel,
    ChannelMatrix,
    ConstructionParams,
    DensityReport,
    channel_apply,
    channel_from_matrix,
    check_block_goodness,
    construct_channel,
    default_f,
    default_g,
    default_p,
    deserialize_channel,
    estimate_bad_density,
    memory_cap,
    sample_matrix,
    serialize_channel,
)
from .coding import (
    CfCode,
    IeCode,
    Orientation,
    ZeroErrorReport,
    build_ie_code,
    cf_decode,
    cf_encode,
    facilitator_output,
    ie_decode,
    ie_encode,
    monte_carlo_error,
    verify_zero_error,
)
from .errors import (
    ChannelFormatError,
    ConstructionExhausted,
    CoopcapError,
    HypothesisViolation,
    InvariantViolation,
    MemoryCapExceeded,
)
from .experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    ExperimentRecord,
    export_records,
    load_jsonl,
    plot_data,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "CoopcapError",
    "MemoryCapExceeded",
    "ConstructionExhausted",
    "ChannelFormatError",
    "HypothesisViolation",
    "InvariantViolation",
    # channel
    "ERASURE",
    "ConstructionParams",
    "ChannelMatrix",
    "Channel",
    "DensityReport",
    "BlockCheckResult",
    "default_f",
    "default_g",
    "default_p",
    "memory_cap",
    "sample_matrix",
    "check_block_goodness",
    "estimate_bad_density",
    "construct_channel",
    "channel_from_matrix",
    "channel_apply",
    "serialize_channel",
    "deserialize_channel",
    # coding
    "Orientation",
    "CfCode",
    "IeCode",
    "ZeroErrorReport",
    "facilitator_output",
    "cf_encode",
    "cf_decode",
    "verify_zero_error",
    "build_ie_code",
    "ie_encode",
    "ie_decode",
    "monte_carlo_error",
    # capacity
    "ProbVector",
    "OutputStats",
    "RateTriple",
    "AltMaxResult",
    "BruteForceResult",
    "UniformDecomposition",
    "xlog2x",
    "entropy_bits",
    "project_to_simplex",
    "as_distribution",
    "output_stats",
    "sum_rate",
    "rate_triple",
    "alternating_maximization",
    "maximize_sum_rate",
    "brute_force_sum_capacity",
    "decompose_into_uniforms",
    "tail_mass_bound",
    # bounds
    "RateRegion",
    "BoundSequences",
    "HyperbolaRegion",
    "FailureBounds",
    "GapBounds",
    "cf_inner_region",
    "cf_outer_region",
    "ie_inner_sum",
    "bound_sequences",
    "hull_max_sum",
    "numeric_hull_max",
    "ie_outer_sum",
    "ie_outer_sum_asymptotic",
    "construction_failure_bounds",
    "theorem_gap",
    # experiments
    "CSV_COLUMNS",
    "ExperimentConfig",
    "ExperimentRecord",
    "run_sweep",
    "export_records",
    "load_jsonl",
    "plot_data",
]
