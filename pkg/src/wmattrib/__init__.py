"""Per-user watermark codebooks with provable detection and attribution.

The package designs maximally separated watermark bitstrings for many
users, detects whether a decoded bitstring carries any registered
watermark, attributes it to the best-matching user, computes exact
closed-form bounds on the error rates of those decisions, and validates
the bounds by simulation of an abstract decoding channel.
"""

from ._kernels import active_backend, available_backends, set_backend
from .bitstring import (
    Codebook,
    Watermark,
    alpha_max,
    alpha_min,
    bitwise_accuracy,
    load_codebook,
    matched_bits,
    max_pairwise_ba,
    pairwise_match_stats,
    save_codebook,
)
from .bounds import (
    BoundInputs,
    BoundResult,
    binom_tail_ge,
    binom_tail_le,
    detection_implies_attribution_gap,
    fdr_upper_bound_general,
    fdr_upper_bound_independent,
    tar_lower_bound,
    tdr_lower_bound,
)
from .channel import (
    ChannelParams,
    DecodeSample,
    PostprocessProfile,
    degrade_beta,
    estimate_beta,
    estimate_gamma,
    resolve_profile,
    simulate_unwatermarked_decode,
    simulate_watermarked_decode,
)
from .config import (
    BetaSpec,
    ChannelSpec,
    ExperimentConfig,
    dump_config,
    load_config,
)
from .detection import (
    AttributionResult,
    DetectionThreshold,
    Outcome,
    attribute,
    classify_outcome,
    detect,
)
from .errors import (
    CodebookFormatError,
    ConfigError,
    DuplicateUserError,
    DuplicateWatermarkError,
    LengthMismatchError,
    WorkBudgetExceededError,
)
from .experiment import (
    BoundComparison,
    ExperimentReport,
    UserResult,
    build_codebook,
    compare_bounds,
    run_experiment,
    sweep,
    wilson_interval,
)
from .selection import (
    SelectionStrategy,
    brute_force_farthest,
    register_user,
    select_watermark,
)

__version__ = "0.1.0"

__all__ = [
    "AttributionResult",
    "BetaSpec",
    "BoundComparison",
    "BoundInputs",
    "BoundResult",
    "ChannelParams",
    "ChannelSpec",
    "Codebook",
    "CodebookFormatError",
    "ConfigError",
    "DecodeSample",
    "DetectionThreshold",
    "DuplicateUserError",
    "DuplicateWatermarkError",
    "ExperimentConfig",
    "ExperimentReport",
    "LengthMismatchError",
    "Outcome",
    "PostprocessProfile",
    "SelectionStrategy",
    "UserResult",
    "Watermark",
    "WorkBudgetExceededError",
    "active_backend",
    "alpha_max",
    "alpha_min",
    "attribute",
    "available_backends",
    "binom_tail_ge",
    "binom_tail_le",
    "bitwise_accuracy",
    "build_codebook",
    "brute_force_farthest",
    "classify_outcome",
    "compare_bounds",
    "degrade_beta",
    "detect",
    "detection_implies_attribution_gap",
    "dump_config",
    "estimate_beta",
    "estimate_gamma",
    "fdr_upper_bound_general",
    "fdr_upper_bound_independent",
    "load_codebook",
    "load_config",
    "matched_bits",
    "max_pairwise_ba",
    "pairwise_match_stats",
    "register_user",
    "resolve_profile",
    "run_experiment",
    "save_codebook",
    "select_watermark",
    "set_backend",
    "simulate_unwatermarked_decode",
    "simulate_watermarked_decode",
    "sweep",
    "tar_lower_bound",
    "tdr_lower_bound",
    "wilson_interval",
    "__version__",
]
