"""Temporal pattern mining for automated insulin delivery device logs.

Pipeline: parse heterogeneous logs and uniform timestamps to UTC, resample
to regular hourly/daily series under minimum-coverage rules, then mine for
temporal structure with Matrix Profile motif/discord discovery and
DTW/DBA k-means clustering, validated by statistical-fidelity checks and
leave-one-fold-out stability cross-validation.
"""

__version__ = "0.1.0"

from .ingest import (
    LoadReport,
    RawRecord,
    RowRejection,
    UniformSeries,
    load_dataset,
    parse_record,
    uniform_to_utc,
)
from .resample import (
    RegularSeries,
    SegmentSet,
    aggregate_bins,
    build_regular_series,
    extract_day_segments,
    extract_week_segments,
    longest_run,
    qualify_day_daily,
    qualify_day_hourly,
)
from .stats import (
    HeatmapGrid,
    ScalingParams,
    compare_groupings,
    descriptive_stats,
    heatmap_grid,
    mean_confidence_interval,
    minmax_scale,
    scale_segments,
    zscore,
)
from .matprof import (
    MatrixProfileResult,
    matrix_profile,
    matrix_profile_naive,
    top_discord,
    top_motif,
    znorm_distance_profile,
)
from .warp import Barycenter, WarpConfig, dba, dtw, dtw_multivariate
from .cluster import (
    ClusterModel,
    FoldPlan,
    cross_validate_stability,
    elbow_scan,
    kfold_split,
    kmeans_fit,
    silhouette,
)
from .synth import Archetype, GapWindow, SynthSpec, generate, plant_motif_series

__all__ = [
    "__version__",
    "LoadReport", "RawRecord", "RowRejection", "UniformSeries",
    "load_dataset", "parse_record", "uniform_to_utc",
    "RegularSeries", "SegmentSet", "aggregate_bins", "build_regular_series",
    "extract_day_segments", "extract_week_segments", "longest_run",
    "qualify_day_daily", "qualify_day_hourly",
    "HeatmapGrid", "ScalingParams", "compare_groupings", "descriptive_stats",
    "heatmap_grid", "mean_confidence_interval", "minmax_scale",
    "scale_segments", "zscore",
    "MatrixProfileResult", "matrix_profile", "matrix_profile_naive",
    "top_discord", "top_motif", "znorm_distance_profile",
    "Barycenter", "WarpConfig", "dba", "dtw", "dtw_multivariate",
    "ClusterModel", "FoldPlan", "cross_validate_stability", "elbow_scan",
    "kfold_split", "kmeans_fit", "silhouette",
    "Archetype", "GapWindow", "SynthSpec", "generate", "plant_motif_series",
]
