"""Molecular kernels, truncated kernel ridge regression and spectral analysis."""

from .dataset_io import (
    FeatureDataset,
    FingerprintDataset,
    LocalEnvDataset,
    Molecule,
    SplitSpec,
    TargetTable,
    make_split,
    read_features,
    read_fingerprints,
    read_local_envs,
    read_split,
    read_targets,
    write_features,
    write_fingerprints,
    write_local_envs,
    write_split,
    write_targets,
)
from .errors import ConfigError, NumericalError, ParseError, ValidationError
from .experiments import (
    DEFAULT_LEVELS,
    CorrelationReport,
    EvaluationResult,
    LearningCurveResult,
    MetricRow,
    TruncationSweepResult,
    correlate_metrics,
    evaluate,
    learning_curve,
    pearson_ci,
    rank_of_level,
    recovery_threshold,
    truncation_sweep,
)
from .kernels import (
    FINGERPRINT_FAMILIES,
    ISO_FAMILIES,
    CrossKernel,
    KernelConfig,
    KernelMatrix,
    cross,
    fingerprint_kernel,
    gram,
    iso_kernel,
    local_kernel,
    read_gram_cache,
    write_gram_cache,
)
from .regression import (
    DEFAULT_LAMBDA_GRID,
    FitReport,
    KRRModel,
    Scores,
    fit,
    predict,
    score,
    tune_lambda,
)
from .spectral import (
    EigenSystem,
    MetricBlock,
    SpectralMetrics,
    SpectrumReport,
    approx_truncated_cross,
    eigendecompose,
    power_law_alpha,
    spectral_metrics,
    spectral_rank,
    spectrum_report,
    truncated_gram,
    truncated_spectrum,
)

__version__ = "0.1.0"
