"""Position-aware item-to-item similarity and sequential recommendation."""

from .domain import (
    MEASURES,
    SCALINGS,
    InteractionRecord,
    SessionWindow,
    SimilarityParams,
    UserSequence,
    make_session_window,
)
from .evaluation import (
    EvalResult,
    GridSearchResult,
    evaluate,
    expand_grid,
    grid_search,
    ndcg_at_k,
    one_call_at_k,
)
from .ingest import (
    ColumnSchema,
    Dataset,
    DatasetStats,
    build_dataset,
    deduplicate,
    filter_positive,
    load_dataset,
    parse_interactions,
    save_dataset,
    subsample_users,
)
from .predictor import ScoredItem, recommend_top_k, score_item
from .similarity import (
    NeighborIndex,
    PairStats,
    PairStore,
    average_uni_by_gap,
    bis_similarity,
    build_neighbor_index,
    cosine_similarity,
    count_pairs,
    pas_similarity,
    pas_uni_similarity,
    scale,
)
from .synth import SynthConfig, generate, write_log

__version__ = "0.1.0"

__all__ = [
    "MEASURES",
    "SCALINGS",
    "InteractionRecord",
    "SessionWindow",
    "SimilarityParams",
    "UserSequence",
    "make_session_window",
    "EvalResult",
    "GridSearchResult",
    "evaluate",
    "expand_grid",
    "grid_search",
    "ndcg_at_k",
    "one_call_at_k",
    "ColumnSchema",
    "Dataset",
    "DatasetStats",
    "build_dataset",
    "deduplicate",
    "filter_positive",
    "load_dataset",
    "parse_interactions",
    "save_dataset",
    "subsample_users",
    "ScoredItem",
    "recommend_top_k",
    "score_item",
    "NeighborIndex",
    "PairStats",
    "PairStore",
    "average_uni_by_gap",
    "bis_similarity",
    "build_neighbor_index",
    "cosine_similarity",
    "count_pairs",
    "pas_similarity",
    "pas_uni_similarity",
    "scale",
    "SynthConfig",
    "generate",
    "write_log",
]
