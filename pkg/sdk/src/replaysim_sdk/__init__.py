"""Client SDK and scripted baselines for the chronological-replay
forecasting environment. Speaks only the wire protocol; the simulation
server is a separate package."""

from .baselines import (
    Abstainer,
    BaselineResult,
    KeywordFrequency,
    POLICIES,
    QuestionSpec,
    ScriptedAgent,
    UniformTopK,
    extract_candidates,
    run_baseline,
    uniform_top_k_expected_bss,
    uniform_top_k_outcomes,
)
from .client import ClientSession, ProtocolError, TransportError, encode_request

__version__ = "0.1.0"
