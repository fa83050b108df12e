"""Matrix completion and clustering tools for multi-regional input-output tables."""

from __future__ import annotations

import types as _types

from .clustering import (
    ClusterAssignment,
    Dendrogram,
    Direction,
    DissimilarityMatrix,
    Linkage,
    aacd,
    country_series,
    cut,
    dissimilarity_matrix,
    hierarchical_cluster,
    select_num_clusters,
    wss_tss_ratio,
)
from .completion import (
    CompletionConfig,
    CompletionResult,
    SelectionMetric,
    complete_panel,
    default_lambda_grid,
    extended_lambda_grid,
    run_lambda_path,
    soft_impute,
)
from .errors import (
    CountryLookupError,
    IllPosedLayoutError,
    IOMCError,
    LayoutError,
    MetricError,
    ParseError,
    SanitizationError,
    SelectionError,
)
from .ingest import SchemaOptions, parse_table, read_tables, sparsity_stats
from .iomodel import (
    BlockRef,
    IOIndex,
    IOTable,
    PanelLayout,
    PanelMatrix,
    assemble_panel,
    build_transition,
    extract_block,
    sanitize,
)
from .linalg import soft_threshold_svd, svd, truncated_rank_k
from .masks import ObservationMask, mask_split
from .metrics import rmse, smape
from .synthetic import SyntheticConfig, generate_synthetic, run_cluster_count_simulation

__version__ = "0.1.0"

__all__ = sorted(
    name for name, value in globals().items()
    if not name.startswith("_") and name != "annotations"
    and not isinstance(value, _types.ModuleType)
)
