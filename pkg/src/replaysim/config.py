"""Run configuration: a single YAML document with defaults matching the
benchmark setup (outcome cap 5, 5 chunks of 512 tokens, daily cadence)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Optional

import yaml

from . import errors
from .model import DEFAULT_PLACEHOLDERS, ForecastLimits, Question


@dataclass
class RunConfig:
    start_date: date
    questions_path: Path
    corpus_path: Path
    end_date: Optional[date] = None
    step_days: int = 1
    mode: str = "native"  # native | custom-harness | multi-agent
    agents: tuple[str, ...] = ("agent-1",)
    scripts: dict[str, Path] = field(default_factory=dict)
    max_outcomes: int = 5
    chunk_tokens: int = 512
    search_k: int = 5
    per_article_cap: Optional[int] = None
    placeholder_denylist: tuple[str, ...] = DEFAULT_PLACEHOLDERS
    allow_submission_on_resolution_date: bool = False
    max_actions: int = 1000
    max_context_tokens: int = 1_000_000
    submit_reserve_tokens: int = 0
    force_submit_threshold_tokens: int = 0
    freeze_corpus_at_day0: bool = False
    disable_memory_writes: bool = False
    one_shot_mode: bool = False
    fixed_initial_forecasts: Optional[Path] = None
    write_browse_tree: bool = False
    matcher_backend: str = "deterministic"  # deterministic | llm | replay
    matcher_aliases: dict[str, str] = field(default_factory=dict)
    matcher_url: str = "http://localhost:8080/v1/chat/completions"
    matcher_model: str = "judge"
    bootstrap_seed: int = 0
    bootstrap_resamples: int = 10000

    @property
    def limits(self) -> ForecastLimits:
        return ForecastLimits(
            max_outcomes=self.max_outcomes,
            placeholder_denylist=tuple(self.placeholder_denylist),
            allow_submission_on_resolution_date=self.allow_submission_on_resolution_date,
        )

    def to_dict(self) -> dict:
        return {
            "start_date": self.start_date.isoformat(),
            "end_date": self.end_date.isoformat() if self.end_date else None,
            "step_days": self.step_days,
            "mode": self.mode,
            "agents": list(self.agents),
            "scripts": {a: str(p) for a, p in self.scripts.items()},
            "questions": str(self.questions_path),
            "corpus": str(self.corpus_path),
            "max_outcomes": self.max_outcomes,
            "chunk_tokens": self.chunk_tokens,
            "search_k": self.search_k,
            "per_article_cap": self.per_article_cap,
            "placeholder_denylist": list(self.placeholder_denylist),
            "allow_submission_on_resolution_date": self.allow_submission_on_resolution_date,
            "max_actions": self.max_actions,
            "max_context_tokens": self.max_context_tokens,
            "submit_reserve_tokens": self.submit_reserve_tokens,
            "force_submit_threshold_tokens": self.force_submit_threshold_tokens,
            "freeze_corpus_at_day0": self.freeze_corpus_at_day0,
            "disable_memory_writes": self.disable_memory_writes,
            "one_shot_mode": self.one_shot_mode,
            "fixed_initial_forecasts": (
                str(self.fixed_initial_forecasts) if self.fixed_initial_forecasts else None
            ),
            "write_browse_tree": self.write_browse_tree,
            "matcher_backend": self.matcher_backend,
            "matcher_aliases": dict(self.matcher_aliases),
            "matcher_url": self.matcher_url,
            "matcher_model": self.matcher_model,
            "bootstrap_seed": self.bootstrap_seed,
            "bootstrap_resamples": self.bootstrap_resamples,
        }


def load_config(path: Path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise errors.ConfigInvalid(str(exc)) from exc
    if not isinstance(raw, dict):
        raise errors.ConfigInvalid("config must be a mapping")
    return config_from_dict(raw, base=path.parent)


def config_from_dict(raw: dict, base: Path = Path(".")) -> RunConfig:
    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    try:
        start = date.fromisoformat(str(raw["start_date"]))
        questions = resolve(raw["questions"])
        corpus = resolve(raw["corpus"])
    except KeyError as exc:
        raise errors.ConfigInvalid(f"missing config key {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise errors.ConfigInvalid(str(exc)) from exc
    end = raw.get("end_date")
    mode = raw.get("mode", "native")
    if mode not in ("native", "custom-harness", "multi-agent"):
        raise errors.ConfigInvalid(f"unknown mode {mode!r}")
    agents = tuple(raw.get("agents", ["agent-1"]))
    if not agents:
        raise errors.ConfigInvalid("at least one agent required")
    scripts = {a: resolve(p) for a, p in (raw.get("scripts") or {}).items()}
    fixed = raw.get("fixed_initial_forecasts")
    try:
        return RunConfig(
            start_date=start,
            end_date=date.fromisoformat(str(end)) if end else None,
            step_days=int(raw.get("step_days", 1)),
            mode=mode,
            agents=agents,
            scripts=scripts,
            questions_path=questions,
            corpus_path=corpus,
            max_outcomes=int(raw.get("max_outcomes", 5)),
            chunk_tokens=int(raw.get("chunk_tokens", 512)),
            search_k=int(raw.get("search_k", 5)),
            per_article_cap=raw.get("per_article_cap"),
            placeholder_denylist=tuple(
                raw.get("placeholder_denylist", DEFAULT_PLACEHOLDERS)
            ),
            allow_submission_on_resolution_date=bool(
                raw.get("allow_submission_on_resolution_date", False)
            ),
            max_actions=int(raw.get("max_actions", 1000)),
            max_context_tokens=int(raw.get("max_context_tokens", 1_000_000)),
            submit_reserve_tokens=int(raw.get("submit_reserve_tokens", 0)),
            force_submit_threshold_tokens=int(
                raw.get("force_submit_threshold_tokens", 0)
            ),
            freeze_corpus_at_day0=bool(raw.get("freeze_corpus_at_day0", False)),
            disable_memory_writes=bool(raw.get("disable_memory_writes", False)),
            one_shot_mode=bool(raw.get("one_shot_mode", False)),
            fixed_initial_forecasts=resolve(fixed) if fixed else None,
            write_browse_tree=bool(raw.get("write_browse_tree", False)),
            matcher_backend=raw.get("matcher_backend", "deterministic"),
            matcher_aliases=dict(raw.get("matcher_aliases") or {}),
            matcher_url=raw.get("matcher_url", "http://localhost:8080/v1/chat/completions"),
            matcher_model=raw.get("matcher_model", "judge"),
            bootstrap_seed=int(raw.get("bootstrap_seed", 0)),
            bootstrap_resamples=int(raw.get("bootstrap_resamples", 10000)),
        )
    except (TypeError, ValueError) as exc:
        raise errors.ConfigInvalid(str(exc)) from exc


def load_questions(path: Path) -> list[Question]:
    path = Path(path)
    if not path.exists():
        raise errors.QuestionFileInvalid(f"question file not found: {path}")
    questions = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                questions.append(
                    Question(
                        qid=str(rec["qid"]),
                        title=rec["title"],
                        background=rec.get("background", ""),
                        resolution_criteria=rec.get("resolution_criteria", ""),
                        answer_type=rec.get("answer_type", "String"),
                        open_date=date.fromisoformat(rec["open_date"]),
                        resolution_date=date.fromisoformat(rec["resolution_date"]),
                        ground_truth=rec.get("ground_truth"),
                        source_ref=rec.get("source_ref"),
                    )
                )
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise errors.QuestionFileInvalid(f"{path}:{i}: {exc}") from exc
    return questions
