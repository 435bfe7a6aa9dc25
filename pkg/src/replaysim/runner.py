"""Run execution and deterministic replay.

A run directory contains everything needed to re-execute the simulation and
verify byte-identical outputs:

    config.yaml            frozen copy of the effective configuration
    transcript.jsonl       every tool request/response in order
    snapshots/<agent>/market-YYYY-MM-DD.csv
    predictions/<agent>/YYYY-MM-DD.json
    memory/<agent>/YYYY-MM-DD/{mem.csv, meta.yaml}
    matcher_cache.jsonl    recorded matcher verdicts (llm backend)
    metrics.csv            daily per-agent metric series
    report.json            final metrics, per-question scores, TW/TWPeer/TV
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Optional

import yaml

from . import errors, scoring
from .config import RunConfig, load_questions
from .corpus import CorpusStore, load_jsonl_records
from .engine import EngineConfig, SimulationEngine
from .matching import DeterministicMatcher, RecordedLLMMatcher, TranscriptCache
from .memory import MemoryStore
from .multiagent import convergence_report, tw_peer_for
from .protocol import NEXT_DAY, BudgetConfig, ToolServer

METRICS_COLUMNS = [
    "date",
    "agent",
    "mean_bss",
    "accuracy",
    "num_resolved",
    "num_predictions",
    "new_article_count",
    "active_count",
]


def build_matcher(config: RunConfig, run_dir: Path, replay: bool = False):
    if config.matcher_backend == "deterministic":
        return DeterministicMatcher(aliases=config.matcher_aliases)
    cache = TranscriptCache(run_dir / "matcher_cache.jsonl")
    if config.matcher_backend == "replay" or replay:
        return RecordedLLMMatcher(cache, client=None)
    if config.matcher_backend == "llm":
        import httpx

        return RecordedLLMMatcher(
            cache,
            client=httpx.Client(),
            model=config.matcher_model,
            url=config.matcher_url,
        )
    raise errors.ConfigInvalid(f"unknown matcher backend {config.matcher_backend!r}")


def build_environment(
    config: RunConfig, run_dir: Path, replay: bool = False
) -> tuple[SimulationEngine, ToolServer]:
    if not config.corpus_path.exists():
        raise errors.CorpusMissing(str(config.corpus_path))
    questions = load_questions(config.questions_path)
    corpus = CorpusStore(
        chunk_tokens=config.chunk_tokens, per_article_cap=config.per_article_cap
    )
    corpus.ingest(load_jsonl_records(config.corpus_path))
    fixed = None
    if config.fixed_initial_forecasts is not None:
        fixed = json.loads(config.fixed_initial_forecasts.read_text(encoding="utf-8"))
    engine = SimulationEngine(
        EngineConfig(
            start_date=config.start_date,
            end_date=config.end_date,
            step_days=config.step_days,
            agents=config.agents,
            limits=config.limits,
            freeze_corpus_at_day0=config.freeze_corpus_at_day0,
            one_shot_mode=config.one_shot_mode,
            multi_agent=config.mode == "multi-agent",
        ),
        questions,
        corpus,
        matcher=build_matcher(config, run_dir, replay=replay),
        fixed_initial_forecasts=fixed,
    )
    stores = {
        a: MemoryStore(
            known_qids=set(engine.questions),
            writes_disabled=config.disable_memory_writes,
        )
        for a in config.agents
    }
    server = ToolServer(
        engine,
        mode=config.mode,
        budget_config=BudgetConfig(
            max_actions=config.max_actions,
            max_context_tokens=config.max_context_tokens,
            submit_reserve_tokens=config.submit_reserve_tokens,
            force_submit_threshold_tokens=config.force_submit_threshold_tokens,
        ),
        memory_stores=stores,
    )
    return engine, server


class RunRecorder:
    """Writes every run artifact; shared by live runs and replays so both
    produce byte-comparable directories."""

    def __init__(self, run_dir: Path, config: RunConfig, engine: SimulationEngine, server: ToolServer):
        self.run_dir = Path(run_dir)
        self.config = config
        self.engine = engine
        self.server = server
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._transcript = open(self.run_dir / "transcript.jsonl", "w", encoding="utf-8")
        self.metrics_rows: list[dict] = []
        self.daily_forecasts: dict[str, dict[str, dict[str, dict[str, float]]]] = {}
        self.action_count = 0
        server.transcript_sink = self._record_exchange
        server.on_day_advanced = self._on_day_advanced
        for agent in config.agents:
            server.workspace_roots[agent] = self.run_dir / "memory-root" / agent
        (self.run_dir / "config.yaml").write_text(
            yaml.safe_dump(config.to_dict(), sort_keys=True), encoding="utf-8"
        )
        self._snapshot_day(engine.today)
        self._metrics_for_day(engine.today, new_articles=0)

    # --- callbacks --------------------------------------------------------

    def _record_exchange(self, exchange: dict) -> None:
        self.action_count += 1
        self._transcript.write(json.dumps(exchange, sort_keys=True) + "\n")
        self._transcript.flush()

    def _on_day_advanced(self, feedback: dict[str, dict]) -> None:
        engine = self.engine
        completed = engine.today - timedelta(days=engine.clock.step_days)
        held: dict[str, dict[str, dict[str, float]]] = {}
        for agent in self.config.agents:
            held[agent] = {
                qid: f.as_dict()
                for (a, qid), f in engine.latest_forecast.items()
                if a == agent and f.outcomes
            }
            pred_dir = self.run_dir / "predictions" / agent
            pred_dir.mkdir(parents=True, exist_ok=True)
            (pred_dir / f"{completed.isoformat()}.json").write_text(
                json.dumps(self.server.submissions_today[agent], sort_keys=True, indent=2)
                + "\n",
                encoding="utf-8",
            )
        self.daily_forecasts[completed.isoformat()] = held
        new_articles = next(iter(feedback.values()))["new_article_count"] if feedback else 0
        self._snapshot_day(engine.today)
        self._metrics_for_day(engine.today, new_articles=new_articles)

    # --- writers ----------------------------------------------------------

    def _snapshot_day(self, day: date) -> None:
        for agent in self.config.agents:
            target = self.run_dir / "snapshots" / agent
            target.mkdir(parents=True, exist_ok=True)
            (target / f"market-{day.isoformat()}.csv").write_text(
                self.engine.snapshot_state_csv(agent), encoding="utf-8"
            )
        if self.config.write_browse_tree:
            self.engine.corpus.write_browse_tree(self.run_dir / "workspace", self.engine.gate)

    def _metrics_for_day(self, day: date, new_articles: int) -> None:
        for agent in self.config.agents:
            mean_bss, accuracy = self.engine.mean_metrics_for(agent)
            self.metrics_rows.append(
                {
                    "date": day.isoformat(),
                    "agent": agent,
                    "mean_bss": f"{mean_bss:.9f}",
                    "accuracy": f"{accuracy:.9f}",
                    "num_resolved": len(self.engine.resolutions),
                    "num_predictions": sum(
                        1
                        for (a, _), f in self.engine.latest_forecast.items()
                        if a == agent and f.outcomes
                    ),
                    "new_article_count": new_articles,
                    "active_count": len(self.engine.active_qids()),
                }
            )

    def finalize(self) -> None:
        with open(self.run_dir / "metrics.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS)
            writer.writeheader()
            for row in self.metrics_rows:
                writer.writerow(row)
        engine = self.engine
        per_question: dict[str, dict[str, float]] = {}
        per_question_hits: dict[str, dict[str, int]] = {}
        for agent in self.config.agents:
            per_question[agent] = {}
            per_question_hits[agent] = {}
            for qid, records in engine.resolutions.items():
                record = records.get(agent)
                if record is not None:
                    per_question[agent][qid] = record.bss
                    per_question_hits[agent][qid] = 1 if record.accuracy_hit else 0
        tw = {
            agent: scoring.time_weighted(engine.daily_scores[agent])
            if engine.daily_scores[agent]
            else 0.0
            for agent in self.config.agents
        }
        report: dict = {
            "final": {
                agent: {
                    "mean_bss": engine.mean_metrics_for(agent)[0],
                    "accuracy": engine.mean_metrics_for(agent)[1],
                    "time_weighted": tw[agent],
                }
                for agent in self.config.agents
            },
            "per_question_bss": per_question,
            "per_question_accuracy": per_question_hits,
            "action_count": self.action_count,
            "terminated": engine.terminated,
        }
        if self.config.mode == "multi-agent" and len(self.config.agents) > 1:
            conv = convergence_report(self.daily_forecasts, engine)
            report["tv_by_day"] = conv.tv_by_day
            report["tw_peer"] = conv.tw_peer
        (self.run_dir / "report.json").write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        self._transcript.close()


def _load_script(path: Path) -> list[dict]:
    requests = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                requests.append(json.loads(line))
    return requests


def execute_run(config: RunConfig, run_dir: Path) -> Path:
    """Execute a scripted simulation and emit the full run directory."""
    run_dir = Path(run_dir)
    engine, server = build_environment(config, run_dir)
    recorder = RunRecorder(run_dir, config, engine, server)
    scripts = {
        agent: _load_script(path) for agent, path in config.scripts.items()
    }
    cursors = {agent: 0 for agent in config.agents}
    next_id = [0]

    def synthetic_next_day(agent: str) -> dict:
        next_id[0] += 1
        return {
            "id": f"auto-{next_id[0]}",
            "tool_name": NEXT_DAY,
            "arguments": {},
            "agent": agent,
        }

    while not engine.terminated:
        for agent in config.agents:
            if engine.terminated:
                break
            day_over = False
            while not day_over:
                script = scripts.get(agent, [])
                if cursors[agent] < len(script):
                    request = dict(script[cursors[agent]])
                    cursors[agent] += 1
                    request["agent"] = agent
                else:
                    request = synthetic_next_day(agent)
                response = server.handle(request)
                if request["tool_name"] == NEXT_DAY and response.get("ok"):
                    if "advanced" in response["payload"]:
                        day_over = True
                elif (
                    not response.get("ok")
                    and response["error"]["code"] == "AlreadyTerminated"
                ):
                    day_over = True
    recorder.finalize()
    return run_dir


def execute_replay(run_dir: Path, out_dir: Path) -> dict:
    """Re-execute a run from its transcript and report byte-diffs.

    The replay consumes recorded matcher verdicts; a missing verdict cache
    for an llm-backend run is TranscriptCorrupt.
    """
    run_dir = Path(run_dir)
    transcript_path = run_dir / "transcript.jsonl"
    config_path = run_dir / "config.yaml"
    if not transcript_path.exists() or not config_path.exists():
        raise errors.TranscriptCorrupt(f"missing transcript or config in {run_dir}")
    from .config import config_from_dict

    raw = yaml.safe_load(config_path.read_text(encoding="utf-8"))
    config = config_from_dict(
        {**raw, "matcher_backend": "replay" if raw.get("matcher_backend") == "llm" else raw.get("matcher_backend", "deterministic")},
        base=run_dir,
    )
    if config.matcher_backend == "replay" and not (run_dir / "matcher_cache.jsonl").exists():
        raise errors.TranscriptCorrupt("matcher verdict cache missing")
    out_dir = Path(out_dir)
    if config.matcher_backend == "replay":
        out_dir.mkdir(parents=True, exist_ok=True)
        cache_bytes = (run_dir / "matcher_cache.jsonl").read_bytes()
        (out_dir / "matcher_cache.jsonl").write_bytes(cache_bytes)
    engine, server = build_environment(config, out_dir, replay=True)
    recorder = RunRecorder(out_dir, config, engine, server)
    with open(transcript_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                exchange = json.loads(line)
                request = exchange["request"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise errors.TranscriptCorrupt(str(exc)) from exc
            server.handle(request)
    recorder.finalize()
    return diff_run_dirs(run_dir, out_dir)


def diff_run_dirs(original: Path, replayed: Path) -> dict:
    """Byte-compare the replay-relevant artifacts of two run directories."""
    original, replayed = Path(original), Path(replayed)
    diffs: list[str] = []
    compared = 0
    patterns = ["snapshots/**/*.csv", "predictions/**/*.json", "metrics.csv"]
    for pattern in patterns:
        for src in sorted(original.glob(pattern)):
            rel = src.relative_to(original)
            dst = replayed / rel
            compared += 1
            if not dst.exists():
                diffs.append(f"missing: {rel}")
            elif src.read_bytes() != dst.read_bytes():
                diffs.append(f"differs: {rel}")
        for dst in sorted(replayed.glob(pattern)):
            rel = dst.relative_to(replayed)
            if not (original / rel).exists():
                diffs.append(f"extra: {rel}")
    return {"compared": compared, "diffs": diffs, "identical": not diffs}
