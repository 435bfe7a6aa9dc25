"""Metric mathematics for subdistribution forecasts.

Covers the skill score itself, top-1 accuracy, time-weighted and peer
aggregations, coordinate-wise market aggregates, total variation distance,
the expected-score oracle used to check properness, and bootstrap bands.
All functions are pure; callers may parallelize per-question freely.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from . import errors
from .model import Forecast, normalize_label, top_outcome


@dataclass(frozen=True)
class ScoredDay:
    qid: str
    day: date
    bss_t: float
    has_forecast: bool

    def __post_init__(self):
        if not self.has_forecast and self.bss_t != 0.0:
            raise ValueError("day without a forecast must score 0")


@dataclass(frozen=True)
class AggregateDistribution:
    qid: str
    day: Optional[date]
    probs: dict[str, float]
    contributing_agents: int


@dataclass(frozen=True)
class BeliefProjection:
    """True belief restricted to a reported support, plus residual mass."""

    probs: dict[str, float]
    residual: float

    def __post_init__(self):
        total = sum(self.probs.values()) + self.residual
        if abs(total - 1.0) > 1e-9 or self.residual < -1e-12:
            raise errors.InvalidBelief(f"belief mass sums to {total}")


def bss(forecast: Forecast, truth_label: str, matched: Optional[str] = None) -> float:
    """Skill score of a forecast against the realized answer.

    1 - sum over reported outcomes plus the truth of (p - indicator)^2, with
    the matched label (if any) playing the role of the truth and unreported
    truth contributing p=0.  Empty forecast scores exactly 0.
    """
    if not forecast.outcomes:
        return 0.0
    matched_key = normalize_label(matched) if matched is not None else None
    score = 1.0
    truth_seen = False
    for label, p in forecast.outcomes:
        if matched_key is not None and normalize_label(label) == matched_key:
            score -= (p - 1.0) ** 2
            truth_seen = True
        else:
            score -= p * p
    if not truth_seen:
        score -= 1.0  # truth outside the reported set: (0 - 1)^2
    return score


def bss_multi_matched(forecast: Forecast, matched_labels: Sequence[str]) -> float:
    """Score when the matcher declared several reported outcomes equivalent to
    the truth: their probabilities are summed into a single truth term so total
    mass is preserved."""
    if not forecast.outcomes:
        return 0.0
    keys = {normalize_label(m) for m in matched_labels}
    truth_mass = 0.0
    score = 1.0
    any_matched = False
    for label, p in forecast.outcomes:
        if normalize_label(label) in keys:
            truth_mass += p
            any_matched = True
        else:
            score -= p * p
    if any_matched:
        score -= (truth_mass - 1.0) ** 2
    else:
        score -= 1.0
    return score


def accuracy_hit(forecast: Forecast, truth_matcher: Callable[[str], bool]) -> int:
    """1 iff the argmax outcome exists and the matcher accepts it."""
    top = top_outcome(forecast)
    if top is None:
        return 0
    return 1 if truth_matcher(top) else 0


def mean_metrics(
    ledger: Mapping[str, Optional[tuple[float, int]]], n_questions: Optional[int] = None
) -> tuple[float, float]:
    """Mean (bss, accuracy) over all questions.

    `ledger` maps qid -> (score, hit) for the question's current contribution
    (frozen for resolved questions, projected for held forecasts) or None for
    questions with no forecast, which contribute 0.
    """
    n = n_questions if n_questions is not None else len(ledger)
    if n == 0:
        return 0.0, 0.0
    total_bss = 0.0
    total_hits = 0
    for entry in ledger.values():
        if entry is None:
            continue
        score, hit = entry
        total_bss += score
        total_hits += hit
    return total_bss / n, total_hits / n


def _per_question_daily_mean(days: Iterable[ScoredDay]) -> dict[str, float]:
    grouped: dict[str, list[float]] = defaultdict(list)
    for d in days:
        grouped[d.qid].append(d.bss_t)
    means: dict[str, float] = {}
    for qid, scores in grouped.items():
        if not scores:
            raise errors.EmptyWindow(f"question {qid} has an empty open window")
        means[qid] = sum(scores) / len(scores)
    return means


def time_weighted(days: Iterable[ScoredDay]) -> float:
    """100 * sum over questions of the mean daily score across each question's
    open window.  A forecast earns its score on every day it is held."""
    means = _per_question_daily_mean(days)
    return 100.0 * sum(means.values())


def peer_score(own: ScoredDay, others: Sequence[ScoredDay]) -> float:
    """Own daily score minus the mean of the other agents' scores on the same
    (question, day); baseline 0 when no other agent holds an active forecast."""
    active = [o.bss_t for o in others if o.has_forecast]
    baseline = sum(active) / len(active) if active else 0.0
    return own.bss_t - baseline


def tw_peer(peer_days: Iterable[tuple[str, float]]) -> float:
    """Same aggregation as time_weighted over (qid, daily peer score) pairs,
    including the single 100 multiplier."""
    grouped: dict[str, list[float]] = defaultdict(list)
    for qid, value in peer_days:
        grouped[qid].append(value)
    total = 0.0
    for qid, values in grouped.items():
        if not values:
            raise errors.EmptyWindow(f"question {qid} has an empty open window")
        total += sum(values) / len(values)
    return 100.0 * total


def aggregate(forecasts: Sequence[Forecast]) -> AggregateDistribution:
    """Coordinate-wise mean over the union outcome support; outcomes an agent
    did not report are treated as probability 0 for that agent."""
    if not forecasts:
        raise errors.EmptyInput("aggregate of zero forecasts")
    qid = forecasts[0].qid
    if any(f.qid != qid for f in forecasts):
        raise errors.EmptyInput("aggregate over mixed question ids")
    n = len(forecasts)
    sums: dict[str, float] = {}
    display: dict[str, str] = {}
    for f in forecasts:
        for label, p in f.outcomes:
            key = normalize_label(label)
            sums[key] = sums.get(key, 0.0) + p
            display.setdefault(key, label)
    probs = {display[k]: sums[k] / n for k in sorted(sums)}
    return AggregateDistribution(qid=qid, day=None, probs=probs, contributing_agents=n)


def tv_distance(p: Mapping[str, float], p2: Mapping[str, float]) -> float:
    """Half the L1 distance over the union support of two subdistributions."""
    a = {normalize_label(k): v for k, v in p.items()}
    b = {normalize_label(k): v for k, v in p2.items()}
    support = set(a) | set(b)
    return 0.5 * sum(abs(a.get(o, 0.0) - b.get(o, 0.0)) for o in support)


def expected_bss_oracle(belief: BeliefProjection, report: Forecast) -> float:
    """Expected skill score of `report` under `belief`.

    Computed as sum_o pi(o) * (2 p(o) - ||p||^2) + r * (-||p||^2); callers can
    cross-check against the equivalent closed form ||pi||^2 - ||p - pi||^2.
    """
    pi = {normalize_label(k): v for k, v in belief.probs.items()}
    p = {normalize_label(lbl): prob for lbl, prob in report.outcomes}
    norm_p = sum(v * v for v in p.values())
    expected = 0.0
    for o, pio in pi.items():
        expected += pio * (2.0 * p.get(o, 0.0) - norm_p)
    expected += belief.residual * (-norm_p)
    return expected


def expected_bss_closed_form(belief: BeliefProjection, report: Forecast) -> float:
    """||pi||^2 - ||p - pi||^2 over the union support."""
    pi = {normalize_label(k): v for k, v in belief.probs.items()}
    p = {normalize_label(lbl): prob for lbl, prob in report.outcomes}
    support = set(pi) | set(p)
    norm_pi = sum(v * v for v in pi.values())
    dist = sum((p.get(o, 0.0) - pi.get(o, 0.0)) ** 2 for o in support)
    return norm_pi - dist


BOOTSTRAP_RNG = "numpy-pcg64"  # pinned so bands replay bit-exactly


def bootstrap_band(
    scores: Mapping[str, Sequence[float]],
    n_resamples: int,
    seed: int,
) -> tuple[float, float]:
    """Mean and one-standard-deviation band via resampling questions with
    replacement and, per drawn question, one uniformly random run.

    `scores` maps qid -> per-run scores; only questions present in every run
    (i.e. with equal-length score rows) should be passed in. Deterministic
    given the seed; the RNG algorithm is pinned to PCG64.
    """
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    qids = sorted(scores)
    if not qids:
        raise errors.EmptyIntersection("no common questions across runs")
    rows = [list(scores[q]) for q in qids]
    if any(len(r) == 0 for r in rows):
        raise errors.EmptyIntersection("question with zero runs")
    n_runs = len(rows[0])
    if any(len(r) != n_runs for r in rows):
        raise errors.EmptyIntersection("unequal run counts across questions")
    matrix = np.asarray(rows, dtype=float)  # question x run
    n_q = len(qids)
    rng = np.random.Generator(np.random.PCG64(seed))
    q_draws = rng.integers(0, n_q, size=(n_resamples, n_q))
    r_draws = rng.integers(0, n_runs, size=(n_resamples, n_q))
    estimates = matrix[q_draws, r_draws].mean(axis=1)
    grand_mean = float(matrix.mean(axis=1).mean())
    return grand_mean, float(estimates.std())
