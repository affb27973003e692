"""Simplex vertex extraction from crop features and nearest-vertex 1-shot classification."""
from ._backend import kernels as _kernels
from .errors import (
    BadMagicError,
    DimensionError,
    DimensionMismatchError,
    DuplicateImageError,
    FeatureFileError,
    InvalidInputError,
    SimplexShotError,
    SolverError,
    TruncatedFileError,
)
from .solver import (
    SimplexModel,
    SolverConfig,
    d_step,
    init_model,
    objective,
    pairwise_vertex_penalty,
    reconstruction_error,
    softmax_rows,
    solve,
    v_gradient,
    w_step,
)

from .classifier import (
    ClassificationResult,
    ImageRepresentation,
    classify,
    represent,
    shrink_vertices,
)
from .data import (
    EpisodeSpec,
    FeatureDataset,
    SyntheticTruth,
    generate_dataset,
    generate_synthetic,
    load_features,
    sample_episode,
    save_features,
)
from .evaluation import (
    EvalConfig,
    EvalReport,
    RecoveryReport,
    match_vertices,
    recovery_score,
    run_episodes,
    run_sweep,
)
from .model_selection import SelectionConfig, SelectionResult, elbow_walk, select_k
from .projection import project

__version__ = "0.1.0"
BACKEND = _kernels.NAME
