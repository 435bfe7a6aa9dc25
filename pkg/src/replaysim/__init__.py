"""Deterministic chronological-replay environment for evaluating forecasting
agents on dated document corpora."""

from .model import (
    Forecast,
    ForecastLimits,
    Question,
    ResolutionRecord,
    SimClock,
    top_outcome,
    validate_forecast,
)
from .scoring import (
    AggregateDistribution,
    BeliefProjection,
    ScoredDay,
    aggregate,
    accuracy_hit,
    bootstrap_band,
    bss,
    expected_bss_oracle,
    mean_metrics,
    peer_score,
    time_weighted,
    tv_distance,
    tw_peer,
)
from .corpus import Article, Chunk, CorpusStore, DateGate, chunk_article
from .engine import EngineConfig, SimulationEngine
from .matching import DeterministicMatcher, RecordedLLMMatcher, TranscriptCache
from .memory import Budget, MemoryStore
from .protocol import BudgetConfig, ToolServer

__version__ = "0.1.0"
