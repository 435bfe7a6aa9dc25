"""The environment state machine.

Owns the clock, the date gate, per-agent held forecasts, score ledgers, and
resolution freezing. One engine instance is the single logical owner of a
simulation; all mutations are serialized through its methods.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Optional, Sequence

from . import errors, scoring
from .corpus import CorpusStore, DateGate
from .matching import DeterministicMatcher, MatchBackend
from .model import (
    Forecast,
    ForecastLimits,
    Question,
    ResolutionRecord,
    SimClock,
    top_outcome,
    validate_forecast,
)

MARKET_COLUMNS = [
    "qid",
    "title",
    "background",
    "resolution_criteria",
    "answer_type",
    "resolution_date",
    "is_resolved",
    "ground_truth",
    "num_predictions",
    "options",
    "my_prediction",
    "my_prediction_date",
    "avg_brier",
]


@dataclass
class EngineConfig:
    start_date: date
    end_date: Optional[date] = None
    step_days: int = 1
    agents: tuple[str, ...] = ("agent",)
    limits: ForecastLimits = field(default_factory=ForecastLimits)
    freeze_corpus_at_day0: bool = False
    one_shot_mode: bool = False  # submissions only one day before resolution
    multi_agent: bool = False


@dataclass
class ResolvedEntry:
    qid: str
    title: str
    distribution: dict[str, float]
    ground_truth: str
    bss: float
    tw_contribution: float


@dataclass
class DailyFeedback:
    day: date
    resolved: list[ResolvedEntry]
    num_predictions: int
    num_resolved: int
    accuracy: float
    mean_bss: float
    new_article_count: int
    active_count: int
    terminated: bool


class SimulationEngine:
    def __init__(
        self,
        config: EngineConfig,
        questions: Sequence[Question],
        corpus: CorpusStore,
        matcher: Optional[MatchBackend] = None,
        fixed_initial_forecasts: Optional[dict[str, dict[str, float]]] = None,
    ):
        self.config = config
        self.corpus = corpus
        self.matcher = matcher or DeterministicMatcher()
        end = config.end_date
        if end is None:
            last = max(q.resolution_date for q in questions)
            # one extra step so the final resolutions can be observed
            end = last + timedelta(days=config.step_days)
        self.clock = SimClock(
            start_date=config.start_date,
            current_date=config.start_date,
            end_date=end,
            step_days=config.step_days,
        )
        self.questions: dict[str, Question] = {}
        for q in questions:
            if q.qid in self.questions:
                raise errors.DuplicateQid(q.qid)
            if not (config.start_date <= q.resolution_date <= end):
                raise errors.QuestionOutOfWindow(
                    f"{q.qid} resolves {q.resolution_date.isoformat()} outside window"
                )
            self.questions[q.qid] = q
        self.gate = DateGate(max_visible_date=config.start_date)
        self.latest_forecast: dict[tuple[str, str], Forecast] = {}
        self.resolutions: dict[str, dict[str, ResolutionRecord]] = {}
        self.daily_scores: dict[str, list[scoring.ScoredDay]] = {
            a: [] for a in config.agents
        }
        self.submission_log: list[dict] = []
        self.submission_count: dict[str, int] = {}  # per qid, across agents
        self.published_aggregate: dict[str, dict[str, float]] = {}
        self.terminated = False
        if fixed_initial_forecasts:
            for qid, probs in fixed_initial_forecasts.items():
                for agent in config.agents:
                    self.submit_forecast(agent, qid, probs, cluster=False)

    # --- queries ---------------------------------------------------------

    @property
    def today(self) -> date:
        return self.clock.current_date

    def is_resolved(self, qid: str) -> bool:
        return qid in self.resolutions

    def active_qids(self) -> list[str]:
        return [
            qid
            for qid, q in self.questions.items()
            if not self.is_resolved(qid) and q.open_date <= self.today
        ]

    # --- submissions -----------------------------------------------------

    def _cluster_outcomes(
        self, title: str, outcomes: Sequence[tuple[str, float]]
    ) -> list[tuple[str, float]]:
        """Merge semantically duplicate labels within one submission by summing
        their probabilities onto the first-seen label."""
        merged: list[tuple[str, float]] = []
        for label, prob in outcomes:
            assignment = self.matcher.cluster(title, label, [m[0] for m in merged])
            if assignment.assigned_index is None:
                merged.append((label, prob))
            else:
                i = assignment.assigned_index - 1
                merged[i] = (merged[i][0], merged[i][1] + prob)
        return merged

    def submit_forecast(
        self, agent: str, qid: str, outcomes, cluster: bool = True
    ) -> Forecast:
        """Validate and store the latest forecast for (agent, qid). Same-day
        resubmission overwrites."""
        if self.terminated:
            raise errors.AlreadyTerminated("simulation has ended")
        if qid not in self.questions:
            raise errors.UnknownQuestion(qid)
        if self.is_resolved(qid):
            raise errors.ResolvedQuestion(qid)
        question = self.questions[qid]
        if self.config.one_shot_mode:
            cutoff = question.resolution_date - timedelta(days=1)
            if self.today != cutoff:
                raise errors.QuestionClosed(
                    f"{qid}: one-shot mode only accepts submissions on {cutoff.isoformat()}"
                )
        if isinstance(outcomes, dict):
            pairs = list(outcomes.items())
        else:
            pairs = [(str(lbl), float(p)) for lbl, p in outcomes]
        if cluster:
            pairs = self._cluster_outcomes(question.title, pairs)
        forecast = Forecast(
            qid=qid, outcomes=tuple(pairs), submitted_on=self.today, agent_id=agent
        )
        validated = validate_forecast(forecast, question, self.today, self.config.limits)
        self.latest_forecast[(agent, qid)] = validated
        self.submission_count[qid] = self.submission_count.get(qid, 0) + 1
        self.submission_log.append(
            {
                "agent": agent,
                "qid": qid,
                "date": self.today.isoformat(),
                "outcomes": validated.as_dict(),
            }
        )
        return validated

    # --- scoring helpers -------------------------------------------------

    def _matched_labels(self, question: Question, forecast: Forecast) -> list[str]:
        truth = question.ground_truth
        if truth is None:
            return []
        return [
            label
            for label, _ in forecast.outcomes
            if self.matcher.match(question.title, label, truth).verdict
        ]

    def _projected(self, agent: str, qid: str) -> Optional[tuple[float, int]]:
        """(projected bss, accuracy hit) of the held forecast against the
        recorded ground truth; None when no forecast is held."""
        if self.is_resolved(qid):
            record = self.resolutions[qid].get(agent)
            if record is None:
                return None
            return record.bss, 1 if record.accuracy_hit else 0
        forecast = self.latest_forecast.get((agent, qid))
        if forecast is None or not forecast.outcomes:
            return None
        question = self.questions[qid]
        matched = self._matched_labels(question, forecast)
        score = scoring.bss_multi_matched(forecast, matched)
        top = top_outcome(forecast)
        matched_keys = set(matched)
        hit = 1 if top is not None and top in matched_keys else 0
        return score, hit

    def mean_metrics_for(self, agent: str) -> tuple[float, float]:
        ledger = {qid: self._projected(agent, qid) for qid in self.questions}
        return scoring.mean_metrics(ledger)

    def _tw_contribution(self, agent: str, qid: str) -> float:
        days = [d for d in self.daily_scores[agent] if d.qid == qid]
        if not days:
            return 0.0
        return 100.0 * sum(d.bss_t for d in days) / len(days)

    # --- day loop --------------------------------------------------------

    def next_day(self) -> dict[str, DailyFeedback]:
        """Advance one step: record daily scores for open questions, move the
        clock and gate, resolve questions whose resolution date was passed,
        and emit per-agent feedback."""
        if self.terminated:
            raise errors.AlreadyTerminated("simulation has ended")
        today = self.today
        for agent in self.config.agents:
            for qid, q in self.questions.items():
                if self.is_resolved(qid):
                    continue
                if q.open_date <= today < q.resolution_date:
                    projected = self._projected(agent, qid)
                    if projected is None:
                        entry = scoring.ScoredDay(qid, today, 0.0, False)
                    else:
                        entry = scoring.ScoredDay(qid, today, projected[0], True)
                    self.daily_scores[agent].append(entry)

        self.clock = self.clock.advanced()
        new_date = self.today
        if self.config.freeze_corpus_at_day0:
            new_article_count = 0
        else:
            old_gate = self.gate.max_visible_date
            self.gate.advance(new_date)
            new_article_count = sum(
                self.corpus.count_on(old_gate + timedelta(days=i + 1))
                for i in range((new_date - old_gate).days)
            )

        resolved_now: list[str] = []
        for qid, q in self.questions.items():
            if self.is_resolved(qid) or q.resolution_date >= new_date:
                continue
            if q.ground_truth is None:
                continue
            records: dict[str, ResolutionRecord] = {}
            for agent in self.config.agents:
                forecast = self.latest_forecast.get(
                    (agent, qid), Forecast(qid=qid, agent_id=agent)
                )
                matched = self._matched_labels(q, forecast)
                score = scoring.bss_multi_matched(forecast, matched)
                top = top_outcome(forecast)
                hit = top is not None and top in set(matched)
                records[agent] = ResolutionRecord(
                    qid=qid,
                    resolved_on=new_date,
                    ground_truth=q.ground_truth,
                    matched_outcome_label=matched[0] if matched else None,
                    bss=score,
                    accuracy_hit=hit,
                    scored_forecast=forecast,
                )
            self.resolutions[qid] = records
            resolved_now.append(qid)

        resolvable = [q for q in self.questions.values() if q.ground_truth is not None]
        if resolvable and all(self.is_resolved(q.qid) for q in resolvable):
            self.terminated = True
        if self.today + timedelta(days=self.config.step_days) > self.clock.end_date:
            self.terminated = True  # clock exhausted

        feedback: dict[str, DailyFeedback] = {}
        for agent in self.config.agents:
            entries = []
            for qid in resolved_now:
                record = self.resolutions[qid][agent]
                entries.append(
                    ResolvedEntry(
                        qid=qid,
                        title=self.questions[qid].title,
                        distribution=record.scored_forecast.as_dict(),
                        ground_truth=record.ground_truth,
                        bss=record.bss,
                        tw_contribution=self._tw_contribution(agent, qid),
                    )
                )
            mean_bss, accuracy = self.mean_metrics_for(agent)
            feedback[agent] = DailyFeedback(
                day=new_date,
                resolved=entries,
                num_predictions=sum(
                    1 for (a, _), f in self.latest_forecast.items() if a == agent and f.outcomes
                ),
                num_resolved=len(self.resolutions),
                accuracy=accuracy,
                mean_bss=mean_bss,
                new_article_count=new_article_count,
                active_count=len(self.active_qids()),
                terminated=self.terminated,
            )
        return feedback

    # --- snapshots -------------------------------------------------------

    def options_for(self, qid: str) -> list[str]:
        seen: dict[str, str] = {}
        for entry in self.submission_log:
            if entry["qid"] == qid:
                for label in entry["outcomes"]:
                    seen.setdefault(label.casefold(), label)
        return sorted(seen.values(), key=str.casefold)

    def snapshot_state_csv(self, agent: str) -> str:
        """RFC-4180 CSV snapshot of all questions as seen by one agent. Ground
        truth stays empty until the question resolves; the frozen score for a
        resolved question never changes in later snapshots."""
        mean_bss, _ = self.mean_metrics_for(agent)
        avg_brier = f"{mean_bss:.6f}"
        buf = io.StringIO()
        columns = list(MARKET_COLUMNS)
        if self.config.multi_agent:
            columns.append("market_aggregate")
        writer = csv.writer(buf)
        writer.writerow(columns)
        for qid in sorted(self.questions):
            q = self.questions[qid]
            resolved = self.is_resolved(qid)
            forecast = self.latest_forecast.get((agent, qid))
            row = [
                q.qid,
                q.title,
                q.background,
                q.resolution_criteria,
                q.answer_type,
                q.resolution_date.isoformat(),
                str(resolved),
                q.ground_truth if resolved and q.ground_truth else "",
                str(self.submission_count.get(qid, 0)),
                json.dumps(self.options_for(qid)) if self.submission_count.get(qid) else "",
                json.dumps(forecast.as_dict(), sort_keys=True) if forecast and forecast.outcomes else "",
                forecast.submitted_on.isoformat() if forecast and forecast.submitted_on else "",
                avg_brier,
            ]
            if self.config.multi_agent:
                agg = self.published_aggregate.get(qid)
                row.append(json.dumps(agg, sort_keys=True) if agg else "")
            writer.writerow(row)
        return buf.getvalue()
