"""Semantic equivalence between free-form outcomes and ground truth.

Two backends behind one interface:

* DeterministicMatcher — normalization + alias table + a substring-specificity
  rule (a prediction that is *more specific* than the truth matches; a vaguer
  one does not). Used by tests and by replay.
* RecordedLLMMatcher — renders the judge prompts, calls a chat-completion
  endpoint at temperature 0 with one retry, and persists every verdict to an
  append-only transcript cache so full simulations replay without the LLM.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

from . import errors
from .model import normalize_label

MATCHER_VERSION = "det-1"

# Generic strings that never match any truth.
GENERIC_RE = re.compile(r"^(unknown|tbd|other|n/?a|none|answer \d+|option \d+)$")


@dataclass(frozen=True)
class MatchVerdict:
    predicted: str
    truth: str
    verdict: bool
    backend: str
    rationale_ref: Optional[str] = None


@dataclass(frozen=True)
class ClusterAssignment:
    candidate: str
    existing: tuple[str, ...]
    assigned_index: Optional[int]  # 1-based

    def __post_init__(self):
        if self.assigned_index is not None and not (
            1 <= self.assigned_index <= len(self.existing)
        ):
            raise ValueError("assigned_index out of range")


class MatchBackend(Protocol):
    name: str

    def match(self, question_title: str, predicted: str, truth: str) -> MatchVerdict: ...

    def cluster(
        self, question_title: str, candidate: str, existing: Sequence[str]
    ) -> ClusterAssignment: ...


def _token_set(text: str) -> list[str]:
    return normalize_label(text).split()


def _more_specific(predicted: str, truth: str) -> bool:
    """True when the truth's tokens appear, in order, inside the prediction
    (e.g. "David Raya" is more specific than "Raya")."""
    pred = _token_set(predicted)
    tru = _token_set(truth)
    if not tru or len(tru) > len(pred):
        return False
    for start in range(len(pred) - len(tru) + 1):
        if pred[start : start + len(tru)] == tru:
            return True
    return False


class DeterministicMatcher:
    """Rule-based matcher: exact normalized equality, then an alias table,
    then the specificity rule. Alias pairs are symmetric."""

    name = "deterministic"

    def __init__(self, aliases: Optional[dict[str, str]] = None):
        self._aliases: dict[str, set[str]] = {}
        for a, b in (aliases or {}).items():
            self._add_alias(a, b)

    def _add_alias(self, a: str, b: str) -> None:
        ka, kb = normalize_label(a), normalize_label(b)
        self._aliases.setdefault(ka, set()).add(kb)
        self._aliases.setdefault(kb, set()).add(ka)

    def _equivalent(self, predicted: str, truth: str) -> bool:
        kp, kt = normalize_label(predicted), normalize_label(truth)
        if GENERIC_RE.match(kp):
            return False
        if kp == kt:
            return True
        if kt in self._aliases.get(kp, ()):
            return True
        return _more_specific(predicted, truth)

    def match(self, question_title: str, predicted: str, truth: str) -> MatchVerdict:
        return MatchVerdict(
            predicted=predicted,
            truth=truth,
            verdict=self._equivalent(predicted, truth),
            backend=self.name,
        )

    def cluster(
        self, question_title: str, candidate: str, existing: Sequence[str]
    ) -> ClusterAssignment:
        key = normalize_label(candidate)
        assigned = None
        for i, label in enumerate(existing, start=1):
            if normalize_label(label) == key:
                assigned = i
                break
        if assigned is None:
            for i, label in enumerate(existing, start=1):
                if self._equivalent(candidate, label):
                    assigned = i
                    break
        return ClusterAssignment(
            candidate=candidate, existing=tuple(existing), assigned_index=assigned
        )


def _cache_key(kind: str, question: str, predicted: str, truth: str, backend_version: str) -> str:
    payload = json.dumps(
        [kind, question, predicted, truth, backend_version], sort_keys=True
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class TranscriptCache:
    """Append-only JSONL store of matcher verdicts keyed by content hash."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._entries: dict[str, dict] = {}
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    entry = json.loads(line)
                    self._entries[entry["key"]] = entry

    def get(self, key: str) -> Optional[dict]:
        return self._entries.get(key)

    def put(self, key: str, prompt: str, verdict, raw_response: str) -> None:
        entry = {
            "key": key,
            "prompt_hash": hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
            "verdict": verdict,
            "raw_response": raw_response,
        }
        self._entries[key] = entry
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def _load_template(name: str) -> str:
    path = Path(__file__).parent / "assets" / "templates" / name
    return path.read_text(encoding="utf-8")


class RecordedLLMMatcher:
    """LLM judge with a verdict cache.

    In replay mode (`client=None`) only cached verdicts are served; a cache
    miss raises BackendUnavailable so replays can flag missing transcripts.
    An unparseable response is retried once, then conservatively treated as No.
    """

    name = "llm"

    def __init__(
        self,
        cache: TranscriptCache,
        client=None,
        model: str = "judge",
        url: str = "http://localhost:8080/v1/chat/completions",
        timeout: float = 30.0,
        version: str = "llm-1",
    ):
        self.cache = cache
        self.client = client
        self.model = model
        self.url = url
        self.timeout = timeout
        self.version = version
        self._equiv_template = _load_template("matcher_equivalence.txt")
        self._cluster_template = _load_template("matcher_cluster.txt")

    def _complete(self, prompt: str) -> str:
        if self.client is None:
            raise errors.BackendUnavailable("no LLM client configured (replay mode)")
        resp = self.client.post(
            self.url,
            json={
                "model": self.model,
                "temperature": 0,
                "messages": [{"role": "user", "content": prompt}],
            },
            timeout=self.timeout,
        )
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]

    def _ask(self, key: str, prompt: str, parse) -> tuple[object, str]:
        cached = self.cache.get(key)
        if cached is not None:
            return cached["verdict"], cached["raw_response"]
        last_raw = ""
        for _ in range(2):  # one retry
            last_raw = self._complete(prompt)
            try:
                verdict = parse(last_raw)
            except errors.UnparseableResponse:
                continue
            self.cache.put(key, prompt, verdict, last_raw)
            return verdict, last_raw
        # two unparseable attempts: treated as No and logged
        self.cache.put(key, prompt, False, last_raw)
        return False, last_raw

    def match(self, question_title: str, predicted: str, truth: str) -> MatchVerdict:
        prompt = (
            self._equiv_template.replace("<question_title>", question_title)
            .replace("<predicted_outcome>", predicted)
            .replace("<ground_truth>", truth)
        )
        key = _cache_key("match", question_title, predicted, truth, self.version)

        def parse(raw: str) -> bool:
            answer = raw.strip().strip('"').strip(".").lower()
            if answer in ("yes", "no"):
                return answer == "yes"
            raise errors.UnparseableResponse(raw)

        verdict, _ = self._ask(key, prompt, parse)
        return MatchVerdict(
            predicted=predicted,
            truth=truth,
            verdict=bool(verdict),
            backend=self.name,
            rationale_ref=key,
        )

    def cluster(
        self, question_title: str, candidate: str, existing: Sequence[str]
    ) -> ClusterAssignment:
        if not existing:
            return ClusterAssignment(candidate, (), None)
        listing = "\n".join(f"{i}. {label}" for i, label in enumerate(existing, 1))
        prompt = (
            self._cluster_template.replace("<question_title>", question_title)
            .replace("<candidate_prediction>", candidate)
            .replace("<existing_predictions>", listing)
        )
        key = _cache_key(
            "cluster", question_title, candidate, json.dumps(list(existing)), self.version
        )

        def parse(raw: str):
            answer = raw.strip().strip('"').strip(".")
            if answer.lower() == "none":
                return None
            if answer.isdigit() and 1 <= int(answer) <= len(existing):
                return int(answer)
            raise errors.UnparseableResponse(raw)

        verdict, _ = self._ask(key, prompt, parse)
        index = verdict if isinstance(verdict, int) else None
        return ClusterAssignment(candidate, tuple(existing), index)
