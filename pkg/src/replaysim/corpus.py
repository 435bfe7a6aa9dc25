"""Dated article corpus: ingest, date-gated browse layout, hybrid search.

The keyword side is a small in-package BM25 over an inverted index so that
date filtering happens inside scoring (no post-hoc leakage risk). A semantic
scorer can be plugged in and is fused via reciprocal-rank fusion; keyword-only
mode is fully functional and is the default.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from . import errors

_WORD_RE = re.compile(r"[a-z0-9]+")


def whitespace_tokenize(text: str) -> list[str]:
    return text.split()


def _terms(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class Article:
    article_id: str
    source: str
    url: str
    published_date: date
    title: str
    body: str


@dataclass(frozen=True)
class Chunk:
    article_id: str
    chunk_index: int
    token_span: tuple[int, int]
    text: str


@dataclass
class DateGate:
    max_visible_date: date

    def advance(self, new_date: date) -> None:
        # monotone within a run; never moves backwards
        if new_date > self.max_visible_date:
            self.max_visible_date = new_date


@dataclass(frozen=True)
class SearchHit:
    chunk: Chunk
    score: float
    article: Article

    @property
    def published_date(self) -> date:
        return self.article.published_date


@dataclass
class IngestReport:
    accepted: int = 0
    duplicates: int = 0
    undated: int = 0
    malformed: int = 0


def chunk_article(
    article: Article,
    tokenizer: Callable[[str], list[str]] = whitespace_tokenize,
    chunk_tokens: int = 512,
) -> list[Chunk]:
    """Greedy tiling of the body into <= chunk_tokens token chunks; the chunks
    cover the body without gaps and the final one may be shorter."""
    tokens = tokenizer(article.body)
    chunks = []
    for i in range(0, len(tokens), chunk_tokens):
        span = tokens[i : i + chunk_tokens]
        chunks.append(
            Chunk(
                article_id=article.article_id,
                chunk_index=i // chunk_tokens,
                token_span=(i, i + len(span)),
                text=" ".join(span),
            )
        )
    return chunks


def _dedup_key(url: str, published: date) -> str:
    url = url.strip().lower().rstrip("/")
    url = re.sub(r"^https?://", "", url)
    return f"{url}|{published.isoformat()}"


class CorpusStore:
    """Immutable-after-ingest article index with date-gated access."""

    def __init__(
        self,
        tokenizer: Callable[[str], list[str]] = whitespace_tokenize,
        chunk_tokens: int = 512,
        per_article_cap: Optional[int] = None,
        bm25_k1: float = 1.5,
        bm25_b: float = 0.75,
    ):
        self.tokenizer = tokenizer
        self.chunk_tokens = chunk_tokens
        self.per_article_cap = per_article_cap
        self.k1 = bm25_k1
        self.b = bm25_b
        self.articles: dict[str, Article] = {}
        self.chunks: list[Chunk] = []
        self._by_date: dict[date, list[str]] = defaultdict(list)
        self._dedup: set[str] = set()
        # BM25 state over chunks
        self._postings: dict[str, list[tuple[int, int]]] = defaultdict(list)
        self._chunk_len: list[int] = []
        self._avg_len: float = 0.0
        self.semantic_scorer: Optional[
            Callable[[str, Sequence[Chunk]], Sequence[float]]
        ] = None

    # --- ingest ----------------------------------------------------------

    def ingest(self, records: Iterable[dict]) -> IngestReport:
        """Deduplicated, date-indexed load of article records. Malformed or
        undated records are skipped and counted, never fatal."""
        report = IngestReport()
        for rec in records:
            try:
                url = rec["url"]
                title = rec.get("title", "")
                body = rec.get("body", "")
                source = rec.get("source", "")
                raw_date = rec["published_date"]
            except (KeyError, TypeError):
                report.malformed += 1
                continue
            if not raw_date:
                report.undated += 1
                continue
            try:
                published = date.fromisoformat(str(raw_date))
            except ValueError:
                report.undated += 1
                continue
            key = _dedup_key(str(url), published)
            if key in self._dedup:
                report.duplicates += 1
                continue
            self._dedup.add(key)
            article_id = rec.get("article_id") or f"a{len(self.articles):07d}"
            article = Article(
                article_id=article_id,
                source=str(source),
                url=str(url),
                published_date=published,
                title=str(title),
                body=str(body),
            )
            self.articles[article_id] = article
            self._by_date[published].append(article_id)
            for chunk in chunk_article(article, self.tokenizer, self.chunk_tokens):
                idx = len(self.chunks)
                self.chunks.append(chunk)
                counts = Counter(_terms(chunk.text) + _terms(article.title))
                for term, tf in counts.items():
                    self._postings[term].append((idx, tf))
                self._chunk_len.append(sum(counts.values()))
            report.accepted += 1
        total = sum(self._chunk_len)
        self._avg_len = total / len(self._chunk_len) if self._chunk_len else 0.0
        return report

    # --- browse ----------------------------------------------------------

    def dates(self) -> list[date]:
        return sorted(self._by_date)

    def articles_on(self, day: date) -> list[Article]:
        return [self.articles[aid] for aid in self._by_date.get(day, [])]

    def count_on(self, day: date) -> int:
        return len(self._by_date.get(day, []))

    def visible_paths(self, gate: DateGate) -> list[str]:
        """Browse-tree paths for exactly the dates at or before the gate."""
        return [
            f"articles/{d.year:04d}/{d.month:02d}/{d.day:02d}/articles.jsonl"
            for d in self.dates()
            if d <= gate.max_visible_date
        ]

    def write_browse_tree(self, root: Path, gate: DateGate, only_date: Optional[date] = None) -> int:
        """Materialize articles/YYYY/MM/DD/articles.jsonl files under root for
        visible dates (or one date, for incremental daily updates)."""
        written = 0
        days = [only_date] if only_date else self.dates()
        for d in days:
            if d is None or d > gate.max_visible_date or d not in self._by_date:
                continue
            target = root / "articles" / f"{d.year:04d}" / f"{d.month:02d}" / f"{d.day:02d}"
            target.mkdir(parents=True, exist_ok=True)
            with open(target / "articles.jsonl", "w", encoding="utf-8") as fh:
                for a in self.articles_on(d):
                    fh.write(
                        json.dumps(
                            {
                                "source": a.source,
                                "url": a.url,
                                "published_date": a.published_date.isoformat(),
                                "title": a.title,
                                "body": a.body,
                            },
                            sort_keys=True,
                        )
                        + "\n"
                    )
            written += 1
        return written

    # --- search ----------------------------------------------------------

    def _bm25_scores(self, query_terms: list[str]) -> dict[int, float]:
        n = len(self.chunks)
        scores: dict[int, float] = defaultdict(float)
        for term in query_terms:
            postings = self._postings.get(term)
            if not postings:
                continue
            df = len(postings)
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            for idx, tf in postings:
                dl = self._chunk_len[idx]
                denom = tf + self.k1 * (1 - self.b + self.b * dl / (self._avg_len or 1.0))
                scores[idx] += idf * tf * (self.k1 + 1) / denom
        return scores

    def search(
        self,
        query: str,
        gate: DateGate,
        from_date: Optional[date] = None,
        to_date: Optional[date] = None,
        k: int = 5,
    ) -> list[SearchHit]:
        """Date-gated hybrid search.

        The effective to_date is capped at the gate, so no chunk dated past
        the current simulation date can ever be returned, regardless of the
        requested range. Ranking ties break on (date, article_id, chunk_index)
        for determinism.
        """
        if not query or not query.strip():
            raise errors.EmptyQuery("empty search query")
        effective_to = gate.max_visible_date
        if to_date is not None and to_date < effective_to:
            effective_to = to_date
        if from_date is not None and from_date > effective_to:
            raise errors.InvalidDateRange(
                f"from {from_date.isoformat()} > effective to {effective_to.isoformat()}"
            )
        terms = _terms(query)
        raw = self._bm25_scores(terms)

        def in_range(idx: int) -> bool:
            d = self.articles[self.chunks[idx].article_id].published_date
            if d > effective_to:
                return False
            if from_date is not None and d < from_date:
                return False
            return True

        candidates = [idx for idx in raw if in_range(idx)]

        def tie_key(idx: int):
            c = self.chunks[idx]
            a = self.articles[c.article_id]
            return (a.published_date, a.article_id, c.chunk_index)

        keyword_ranked = sorted(candidates, key=lambda i: (-raw[i], tie_key(i)))

        if self.semantic_scorer is not None and keyword_ranked:
            # reciprocal-rank fusion of the keyword and semantic orderings
            pool = keyword_ranked[: max(k * 10, 50)]
            sem = self.semantic_scorer(query, [self.chunks[i] for i in pool])
            sem_ranked = [
                idx
                for _, idx in sorted(
                    zip(sem, pool), key=lambda t: (-t[0], tie_key(t[1]))
                )
            ]
            fused: dict[int, float] = defaultdict(float)
            for rank, idx in enumerate(keyword_ranked):
                fused[idx] += 1.0 / (60 + rank + 1)
            for rank, idx in enumerate(sem_ranked):
                fused[idx] += 1.0 / (60 + rank + 1)
            ranked = sorted(fused, key=lambda i: (-fused[i], tie_key(i)))
        else:
            ranked = keyword_ranked

        hits: list[SearchHit] = []
        per_article: Counter = Counter()
        for idx in ranked:
            chunk = self.chunks[idx]
            if self.per_article_cap is not None:
                if per_article[chunk.article_id] >= self.per_article_cap:
                    continue
                per_article[chunk.article_id] += 1
            hits.append(
                SearchHit(
                    chunk=chunk,
                    score=raw.get(idx, 0.0),
                    article=self.articles[chunk.article_id],
                )
            )
            if len(hits) >= k:
                break
        return hits


def load_jsonl_records(path: Path) -> Iterable[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                yield {"_malformed": True}
