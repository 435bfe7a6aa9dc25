"""Multi-agent coordination: lagged market aggregates, peer metrics, and the
convergence (total variation) report.

The only cross-agent channel is the published aggregate: agents never see one
another's raw forecasts. An aggregate computed from day-d forecasts becomes
visible on day d+1 via the market_aggregate column of the shared snapshot.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from datetime import date
from itertools import combinations
from typing import Optional

from . import scoring
from .engine import SimulationEngine
from .scoring import ScoredDay


def publish_aggregates(engine: SimulationEngine) -> None:
    """Compute the coordinate-wise mean of the latest forecasts per question
    and stage it for next-day visibility. Called exactly once per cohort step,
    immediately before the engine advances."""
    published: dict[str, dict[str, float]] = {}
    for qid in engine.questions:
        forecasts = [
            f
            for (agent, fqid), f in engine.latest_forecast.items()
            if fqid == qid and f.outcomes
        ]
        if not forecasts:
            continue
        agg = scoring.aggregate(forecasts)
        # published market values are rounded like all other wire-visible
        # numbers, so coordinate-wise means of tidy inputs stay tidy
        published[qid] = {k: round(v, 9) for k, v in agg.probs.items()}
    engine.published_aggregate = published


def peer_daily_series(engine: SimulationEngine, agent: str) -> list[tuple[str, float]]:
    """(qid, daily peer score) pairs for one agent over the whole run."""
    by_slot: dict[tuple[str, date], dict[str, ScoredDay]] = defaultdict(dict)
    for a in engine.config.agents:
        for d in engine.daily_scores[a]:
            by_slot[(d.qid, d.day)][a] = d
    series = []
    for (qid, day), slot in sorted(by_slot.items()):
        own = slot.get(agent)
        if own is None:
            continue
        others = [s for a, s in slot.items() if a != agent]
        series.append((qid, scoring.peer_score(own, others)))
    return series


def tw_peer_for(engine: SimulationEngine, agent: str) -> float:
    return scoring.tw_peer(peer_daily_series(engine, agent))


@dataclass
class ConvergenceReport:
    tv_by_day: dict[str, float]  # ISO date -> mean pairwise TV over shared questions
    tw_peer: dict[str, float]  # agent -> time-weighted peer score


def convergence_report(
    daily_forecasts: dict[str, dict[str, dict[str, dict[str, float]]]],
    engine: Optional[SimulationEngine] = None,
) -> ConvergenceReport:
    """Per-day mean pairwise total variation across agents.

    `daily_forecasts` maps ISO date -> agent -> qid -> outcome distribution
    (the forecasts held at the end of that day). TV is averaged over every
    agent pair and every question both agents hold.
    """
    tv_by_day: dict[str, float] = {}
    for day, per_agent in sorted(daily_forecasts.items()):
        agents = sorted(per_agent)
        distances = []
        for a, b in combinations(agents, 2):
            shared = set(per_agent[a]) & set(per_agent[b])
            for qid in sorted(shared):
                distances.append(
                    scoring.tv_distance(per_agent[a][qid], per_agent[b][qid])
                )
        tv_by_day[day] = sum(distances) / len(distances) if distances else 0.0
    tw = {}
    if engine is not None:
        tw = {a: tw_peer_for(engine, a) for a in engine.config.agents}
    return ConvergenceReport(tv_by_day=tv_by_day, tw_peer=tw)
