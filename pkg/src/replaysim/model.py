"""Core vocabulary types: questions, forecasts, clocks, resolution records.

All types are immutable values; validation returns a new, normalized forecast
rather than mutating in place so replay stays deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from typing import Optional, Sequence

from . import errors

SUM_TOLERANCE = 1e-9
DEFAULT_MAX_OUTCOMES = 5
DEFAULT_PLACEHOLDERS = ("unknown", "tbd", "other", "n/a")


def normalize_label(label: str) -> str:
    """Case-fold, trim, and collapse internal whitespace."""
    return " ".join(label.split()).casefold()


def canonical_label(label: str) -> str:
    """Display form: trimmed with collapsed whitespace, original case kept."""
    return " ".join(label.split())


@dataclass(frozen=True)
class Question:
    qid: str
    title: str
    background: str = ""
    resolution_criteria: str = ""
    answer_type: str = "String"
    open_date: date = date.min
    resolution_date: date = date.min
    ground_truth: Optional[str] = None
    source_ref: Optional[str] = None

    def __post_init__(self):
        if self.resolution_date < self.open_date:
            raise ValueError(f"question {self.qid}: open_date after resolution_date")

    @property
    def resolvable(self) -> bool:
        return self.ground_truth is not None


@dataclass(frozen=True)
class Forecast:
    qid: str
    outcomes: tuple[tuple[str, float], ...] = ()
    submitted_on: Optional[date] = None
    agent_id: str = "agent"

    @property
    def total_mass(self) -> float:
        return sum(p for _, p in self.outcomes)

    def probability(self, label: str) -> float:
        key = normalize_label(label)
        return sum(p for lbl, p in self.outcomes if normalize_label(lbl) == key)

    def as_dict(self) -> dict[str, float]:
        return {lbl: p for lbl, p in self.outcomes}


@dataclass(frozen=True)
class ForecastLimits:
    max_outcomes: int = DEFAULT_MAX_OUTCOMES
    sum_tolerance: float = SUM_TOLERANCE
    placeholder_denylist: tuple[str, ...] = DEFAULT_PLACEHOLDERS
    allow_submission_on_resolution_date: bool = False


@dataclass(frozen=True)
class ResolutionRecord:
    qid: str
    resolved_on: date
    ground_truth: str
    matched_outcome_label: Optional[str]
    bss: float
    accuracy_hit: bool
    scored_forecast: Forecast


@dataclass(frozen=True)
class SimClock:
    start_date: date
    current_date: date
    end_date: date
    step_days: int = 1

    def __post_init__(self):
        if self.step_days < 1:
            raise ValueError("step_days must be positive")
        if not (self.start_date <= self.current_date <= self.end_date):
            raise ValueError("current_date outside [start_date, end_date]")
        if (self.current_date - self.start_date).days % self.step_days != 0:
            raise ValueError("current_date not aligned to step_days")

    def advanced(self) -> "SimClock":
        return replace(self, current_date=self.current_date + timedelta(days=self.step_days))

    @property
    def day_index(self) -> int:
        return (self.current_date - self.start_date).days // self.step_days


def validate_forecast(
    f: Forecast,
    q: Question,
    today: date,
    cfg: ForecastLimits = ForecastLimits(),
) -> Forecast:
    """Check every submission rule and return the forecast with normalized labels.

    Raises the named error for the first violated rule. Validation is
    idempotent and insensitive to outcome ordering.
    """
    if f.qid != q.qid:
        raise errors.UnknownQuestion(f"forecast qid {f.qid!r} != question {q.qid!r}")
    # Window is [open_date, resolution_date); the config flag widens it to
    # include the resolution day itself.
    if cfg.allow_submission_on_resolution_date:
        open_window = q.open_date <= today <= q.resolution_date
    else:
        open_window = q.open_date <= today < q.resolution_date
    if not open_window:
        raise errors.QuestionClosed(f"{q.qid}: submissions closed on {today.isoformat()}")

    if len(f.outcomes) > cfg.max_outcomes:
        raise errors.TooManyOutcomes(
            f"{len(f.outcomes)} outcomes exceeds cap of {cfg.max_outcomes}"
        )
    denylist = {normalize_label(x) for x in cfg.placeholder_denylist}
    seen: set[str] = set()
    cleaned: list[tuple[str, float]] = []
    for label, prob in f.outcomes:
        norm = normalize_label(label)
        if not norm:
            raise errors.PlaceholderLabel("empty outcome label")
        if norm in denylist:
            raise errors.PlaceholderLabel(f"placeholder label {label!r}")
        if norm in seen:
            raise errors.DuplicateLabel(f"duplicate label {label!r}")
        seen.add(norm)
        if prob < 0:
            raise errors.NegativeProbability(f"{label!r}: p={prob}")
        cleaned.append((canonical_label(label), float(prob)))
    total = sum(p for _, p in cleaned)
    if total > 1.0 + cfg.sum_tolerance:
        raise errors.SumExceedsOne(f"probabilities sum to {total}")
    return replace(f, outcomes=tuple(cleaned))


def top_outcome(f: Forecast) -> Optional[str]:
    """Argmax-probability label; ties go to the lexicographically smallest
    normalized label; None for an empty outcome list."""
    if not f.outcomes:
        return None
    return min(f.outcomes, key=lambda o: (-o[1], normalize_label(o[0])))[0]
