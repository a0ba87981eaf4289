"""Query-aware keyframe selection for video-language datasets.

Coarse-to-fine pipeline: uniformly pre-sample cn frames from each video,
embed them together with the query text, score by cosine similarity,
and keep the top k frames in temporal order. Uniform, random, and
clustering baselines run behind the same interface for comparison.
"""

from .corpus import CorpusSpec, gen_corpus
from .embedder import MockProvider, RemoteProvider, make_provider
from .errors import (
    ConfigError,
    DecodeError,
    EncodeError,
    KeyframeError,
    ManifestError,
    MetricError,
    ProviderError,
    QueryError,
    ScoreError,
    UnsupportedStrategyError,
    WriteError,
)
from .manifest import ManifestEntry, QueryMode, TextQuery, build_text_query, parse_manifest
from .metrics import RunReport, compression_ratio, success_rate
from .pipeline import RunConfig, bench, reaggregate, run
from .selector import (
    STRATEGIES,
    ScoredFrame,
    SelectionResult,
    cosine_score,
    run_strategy,
    select_topk,
)
from .videoio import CoarseFrameSet, Frame, VideoMeta, coarse_indices, decode_frames

__version__ = "0.1.0"

__all__ = [
    "CoarseFrameSet",
    "ConfigError",
    "CorpusSpec",
    "DecodeError",
    "EncodeError",
    "Frame",
    "KeyframeError",
    "ManifestEntry",
    "ManifestError",
    "MetricError",
    "MockProvider",
    "ProviderError",
    "QueryError",
    "QueryMode",
    "RemoteProvider",
    "RunConfig",
    "RunReport",
    "STRATEGIES",
    "ScoreError",
    "ScoredFrame",
    "SelectionResult",
    "TextQuery",
    "UnsupportedStrategyError",
    "VideoMeta",
    "WriteError",
    "bench",
    "build_text_query",
    "coarse_indices",
    "compression_ratio",
    "cosine_score",
    "decode_frames",
    "gen_corpus",
    "make_provider",
    "parse_manifest",
    "reaggregate",
    "run",
    "run_strategy",
    "select_topk",
    "success_rate",
    "__version__",
]
