"""Structured persistent agent memory, budget accounting, and the two-call
next_day gate used by the custom harness mode."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Optional

import yaml

from . import errors

NOTE_CHAR_CAP = 1000
META_ENTRY_CAP = 500


@dataclass
class QuestionNote:
    qid: str
    question: str
    last_updated: date
    memory: str
    category: str


@dataclass
class MetaInsight:
    index: int
    text: str
    created: date
    updated: date


@dataclass
class Budget:
    actions_remaining: int
    context_tokens_remaining: int
    submit_reserve: int = 0
    force_submit_threshold: int = 0

    def __post_init__(self):
        if self.force_submit_threshold > self.submit_reserve:
            raise ValueError("force_submit_threshold must be <= submit_reserve")


@dataclass(frozen=True)
class ChargeAdvisory:
    session_end: bool
    force_submit: bool


def charge(budget: Budget, action_cost: int = 1, token_cost: int = 0) -> ChargeAdvisory:
    """Decrement the counters in place and report advisory state. Exhaustion is
    advisory here; the tool server enforces it."""
    budget.actions_remaining = max(0, budget.actions_remaining - action_cost)
    budget.context_tokens_remaining = max(0, budget.context_tokens_remaining - token_cost)
    return ChargeAdvisory(
        session_end=(
            budget.actions_remaining <= 0 or budget.context_tokens_remaining <= 0
        ),
        force_submit=budget.context_tokens_remaining <= budget.force_submit_threshold,
    )


class MemoryStore:
    """Per-agent note table and meta-insight list, with caps and the
    disable-writes ablation. Retrieval keeps working while writes are
    disabled; all mutating ops then raise MemoryDisabled."""

    def __init__(
        self,
        known_qids: Optional[set[str]] = None,
        note_char_cap: int = NOTE_CHAR_CAP,
        meta_cap: int = META_ENTRY_CAP,
        writes_disabled: bool = False,
    ):
        self.known_qids = known_qids
        self.note_char_cap = note_char_cap
        self.meta_cap = meta_cap
        self.writes_disabled = writes_disabled
        self.notes: dict[str, QuestionNote] = {}
        self.insights: dict[int, MetaInsight] = {}
        self._next_index = 1

    def _check_writable(self):
        if self.writes_disabled:
            raise errors.MemoryDisabled("memory writes are disabled for this run")

    def _check_qid(self, qid: str):
        if self.known_qids is not None and qid not in self.known_qids:
            raise errors.UnknownQid(qid)

    # --- per-question notes ---------------------------------------------

    def mem_add(self, qid: str, question: str, memory: str, category: str, today: date):
        self._check_writable()
        self._check_qid(qid)
        if qid in self.notes:
            raise errors.DuplicateNote(qid)
        if len(memory) > self.note_char_cap:
            raise errors.NoteTooLong(f"{len(memory)} chars > {self.note_char_cap}")
        self.notes[qid] = QuestionNote(qid, question, today, memory, category)

    def mem_update(self, qid: str, memory: str, today: date):
        self._check_writable()
        if qid not in self.notes:
            raise errors.UnknownQid(qid)
        if len(memory) > self.note_char_cap:
            raise errors.NoteTooLong(f"{len(memory)} chars > {self.note_char_cap}")
        note = self.notes[qid]
        note.memory = memory
        note.last_updated = today

    def mem_delete(self, qid: str):
        self._check_writable()
        if qid not in self.notes:
            raise errors.UnknownQid(qid)
        del self.notes[qid]

    # --- meta-insights ---------------------------------------------------

    def meta_new(self, text: str, today: date) -> int:
        self._check_writable()
        if len(self.insights) >= self.meta_cap:
            raise errors.CapExceeded(f"meta-insight cap {self.meta_cap} reached")
        index = self._next_index
        self._next_index += 1
        self.insights[index] = MetaInsight(index, text, today, today)
        return index

    def meta_update(self, index: int, text: str, today: date):
        self._check_writable()
        if index not in self.insights:
            raise errors.UnknownIndex(str(index))
        insight = self.insights[index]
        insight.text = text
        insight.updated = today

    def meta_delete(self, index: int):
        self._check_writable()
        if index not in self.insights:
            raise errors.UnknownIndex(str(index))
        del self.insights[index]

    def meta_retrieve(self, indices: list[int]) -> list[str]:
        out = []
        for index in indices:
            if index not in self.insights:
                raise errors.UnknownIndex(str(index))
            out.append(self.insights[index].text)
        return out

    # --- persistence -----------------------------------------------------

    def persist(self, root: Path, day: date) -> Path:
        """Write memory/YYYY-MM-DD/{mem.csv, meta.yaml} snapshots."""
        target = root / "memory" / day.isoformat()
        target.mkdir(parents=True, exist_ok=True)
        with open(target / "mem.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["qid", "question", "last_updated", "memory", "category"])
            for qid in sorted(self.notes):
                n = self.notes[qid]
                writer.writerow(
                    [n.qid, n.question, n.last_updated.isoformat(), n.memory, n.category]
                )
        insights = [
            {
                "index": i,
                "text": self.insights[i].text,
                "created": self.insights[i].created.isoformat(),
                "updated": self.insights[i].updated.isoformat(),
            }
            for i in sorted(self.insights)
        ]
        with open(target / "meta.yaml", "w", encoding="utf-8") as fh:
            yaml.safe_dump({"meta_insights": insights}, fh, sort_keys=False)
        return target

    def load_snapshot(self, snapshot_dir: Path) -> None:
        """Rebuild the tables from a persisted snapshot (for round-trip checks
        and resuming runs)."""
        mem_csv = snapshot_dir / "mem.csv"
        if mem_csv.exists():
            with open(mem_csv, "r", encoding="utf-8", newline="") as fh:
                for row in csv.DictReader(fh):
                    self.notes[row["qid"]] = QuestionNote(
                        qid=row["qid"],
                        question=row["question"],
                        last_updated=date.fromisoformat(row["last_updated"]),
                        memory=row["memory"],
                        category=row["category"],
                    )
        meta_yaml = snapshot_dir / "meta.yaml"
        if meta_yaml.exists():
            data = yaml.safe_load(meta_yaml.read_text(encoding="utf-8")) or {}
            for entry in data.get("meta_insights", []):
                insight = MetaInsight(
                    index=int(entry["index"]),
                    text=entry["text"],
                    created=date.fromisoformat(entry["created"]),
                    updated=date.fromisoformat(entry["updated"]),
                )
                self.insights[insight.index] = insight
                self._next_index = max(self._next_index, insight.index + 1)


class DayGate:
    """Two-call next_day gate: the first call per day enters the memory-update
    phase; the second actually advances. Disabled entirely in native mode."""

    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.in_memory_phase = False

    def request_advance(self) -> str:
        """Returns "memory-phase" or "advance"."""
        if not self.enabled:
            return "advance"
        if not self.in_memory_phase:
            self.in_memory_phase = True
            return "memory-phase"
        self.in_memory_phase = False
        return "advance"
