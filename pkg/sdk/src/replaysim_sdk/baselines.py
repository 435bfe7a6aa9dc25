"""Scripted baseline agents.

Three deterministic policies that exercise the environment end to end without
any LLM:

* abstainer: never submits; its final mean skill score is exactly 0.
* uniform-top-k: spreads probability 1/k over k candidate labels, giving a
  closed-form score of 1 - (1/k - 1)^2 - (k - 1)/k^2 whenever the truth is
  among the candidates.
* keyword-frequency: searches each question title daily and submits a
  normalized frequency distribution over candidate strings extracted from
  the results.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .client import ClientSession, ProtocolError

STOPWORDS = frozenset(
    """a an and are as at be by for from has have in is it its of on or that the
    this to was were will with who what when where why how""".split()
)

# strings that the environment's placeholder denylist would reject anyway
BANNED_LABELS = frozenset({"unknown", "tbd", "other", "n/a"})

MAX_OUTCOMES = 5


@dataclass
class QuestionSpec:
    """The slice of a question a baseline needs: its id, its title for search
    queries, and optional candidate labels for the uniform policy."""

    qid: str
    title: str
    labels: Sequence[str] = ()


def uniform_top_k_outcomes(labels: Sequence[str], k: int) -> dict[str, float]:
    chosen = list(labels)[:k]
    if not chosen:
        return {}
    return {label: 1.0 / len(chosen) for label in chosen}


def uniform_top_k_expected_bss(k: int) -> float:
    """Closed-form score when the truth is among the k uniform candidates."""
    return 1.0 - (1.0 / k - 1.0) ** 2 - (k - 1) / k**2


_CANDIDATE_RE = re.compile(r"[A-Za-z][A-Za-z0-9'-]+")


def extract_candidates(texts: Sequence[str], limit: int = MAX_OUTCOMES) -> dict[str, float]:
    """Frequency-normalized distribution over candidate tokens in the search
    results. Deterministic: ties break on (count desc, token asc)."""
    counts: Counter = Counter()
    for text in texts:
        for token in _CANDIDATE_RE.findall(text):
            key = token.lower()
            if key in STOPWORDS or key in BANNED_LABELS or len(key) < 3:
                continue
            counts[token] += 1
    top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:limit]
    total = sum(count for _, count in top)
    if total == 0:
        return {}
    return {token: count / total for token, count in top}


class ScriptedAgent:
    """Base class: one decision hook per simulated day."""

    policy = "noop"

    def decide(self, session: ClientSession, questions: Sequence[QuestionSpec], day_index: int) -> None:
        raise NotImplementedError


class Abstainer(ScriptedAgent):
    policy = "abstainer"

    def decide(self, session, questions, day_index):
        pass


class UniformTopK(ScriptedAgent):
    policy = "uniform-top-k"

    def __init__(self, k: int = 3):
        self.k = k

    def decide(self, session, questions, day_index):
        if day_index > 0:
            return  # one submission, held for the whole window
        for q in questions:
            outcomes = uniform_top_k_outcomes(q.labels, self.k)
            if outcomes:
                session.submit_forecast(q.qid, outcomes)


class KeywordFrequency(ScriptedAgent):
    policy = "keyword-frequency"

    def __init__(self, k: int = 5):
        self.k = k

    def decide(self, session, questions, day_index):
        for q in questions:
            hits = session.search_news(q.title, k=self.k)
            outcomes = extract_candidates([h["text"] for h in hits])
            if outcomes:
                try:
                    session.submit_forecast(q.qid, outcomes)
                except ProtocolError as exc:
                    # a question may resolve mid-run; skip and keep going
                    if exc.code not in ("ResolvedQuestion", "QuestionClosed"):
                        raise


POLICIES = {
    "abstainer": Abstainer,
    "uniform-top-k": UniformTopK,
    "keyword-frequency": KeywordFrequency,
}


@dataclass
class BaselineResult:
    policy: str
    days: int
    final_mean_bss: float
    final_accuracy: float
    num_resolved: int


def run_baseline(
    agent: ScriptedAgent,
    session: ClientSession,
    questions: Sequence[QuestionSpec],
    max_days: int = 365,
) -> BaselineResult:
    """Drive one agent until the simulation terminates.

    The loop is: decide (search/submit), then end the day; the advanced-day
    feedback carries the cumulative metrics used for the result.
    """
    feedback: Optional[dict] = None
    days = 0
    for day_index in range(max_days):
        agent.decide(session, questions, day_index)
        try:
            payload = session.end_day()
        except ProtocolError as exc:
            if exc.code == "AlreadyTerminated":
                break
            raise
        days += 1
        if payload.get("advanced"):
            feedback = payload["feedback"]
            if feedback.get("terminated"):
                break
    if feedback is None:
        raise RuntimeError("simulation produced no daily feedback")
    cumulative = feedback["cumulative"]
    return BaselineResult(
        policy=agent.policy,
        days=days,
        final_mean_bss=cumulative["mean_bss"],
        final_accuracy=cumulative["accuracy"],
        num_resolved=cumulative["num_resolved"],
    )
