"""Batch and incremental multiresolution matrix factorization (MMF).

A symmetric matrix ``C`` is compressed by a sequence of k-point rotations;
after each rotation one coordinate is retired as a wavelet, leaving a small
core. The package builds the factorization greedily (batch) or by inserting
rows into an existing factorization (incremental), scores rows by their
residual, and exports the resulting graph.
"""

from ._validation import ConvergenceError
from .analysis import ScoreVector, leverage_scores, mmf_scores, select_features
from .batch import (
    LevelChoice,
    batch_mmf,
    best_rotation_for_tuple,
    correlation_tuple,
    exhaustive_level,
    level_error,
)
from .estimator import MMF, IncrementalMMF
from .graph import (
    LevelRecord,
    MmfConfig,
    MmfGraph,
    compress,
    error_identity,
    factorization_error,
    reconstruct,
    residual_row_norms,
)
from .incremental import check_insert, generate_tuples, incremental_mmf, insert_row
from .io import (
    covariance_from_data,
    dumps_graph,
    export_dot,
    generate_synthetic,
    load_matrix,
    loads_graph,
    save_matrix,
)
from .linalg import (
    KPointRotation,
    SymMatrix,
    apply_rotation,
    off_core_diag_sqnorm,
    sample_orthogonal,
    sym_eig_small,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "SymMatrix",
    "KPointRotation",
    "apply_rotation",
    "sym_eig_small",
    "sample_orthogonal",
    "off_core_diag_sqnorm",
    "LevelRecord",
    "MmfGraph",
    "MmfConfig",
    "compress",
    "reconstruct",
    "factorization_error",
    "error_identity",
    "residual_row_norms",
    "LevelChoice",
    "level_error",
    "best_rotation_for_tuple",
    "exhaustive_level",
    "correlation_tuple",
    "batch_mmf",
    "generate_tuples",
    "check_insert",
    "insert_row",
    "incremental_mmf",
    "ScoreVector",
    "mmf_scores",
    "leverage_scores",
    "select_features",
    "load_matrix",
    "save_matrix",
    "covariance_from_data",
    "generate_synthetic",
    "dumps_graph",
    "loads_graph",
    "export_dot",
    "MMF",
    "IncrementalMMF",
]
