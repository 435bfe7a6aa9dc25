import json
from datetime import date, timedelta
from pathlib import Path

from replaysim.corpus import CorpusStore
from replaysim.model import Forecast, Question


def make_question(qid="q1", title="Who wins?", open_day=date(2026, 1, 1),
                  resolve_day=date(2026, 1, 10), truth="Alice"):
    return Question(
        qid=qid,
        title=title,
        background="bg",
        resolution_criteria="rc",
        answer_type="String (Name)",
        open_date=open_day,
        resolution_date=resolve_day,
        ground_truth=truth,
    )


def make_forecast(outcomes, qid="q1", day=date(2026, 1, 2), agent="agent-1"):
    if isinstance(outcomes, dict):
        outcomes = tuple(outcomes.items())
    return Forecast(qid=qid, outcomes=tuple(outcomes), submitted_on=day, agent_id=agent)


def article_record(i, day, title="story", body=None, source="src"):
    return {
        "source": source,
        "url": f"https://example.com/{day.isoformat()}/{i}",
        "published_date": day.isoformat(),
        "title": f"{title} {i}",
        "body": body if body is not None else f"news item {i} about events on {day.isoformat()}",
    }




def write_questions(path: Path, questions):
    with open(path, "w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(json.dumps({
                "qid": q.qid,
                "title": q.title,
                "background": q.background,
                "resolution_criteria": q.resolution_criteria,
                "answer_type": q.answer_type,
                "open_date": q.open_date.isoformat(),
                "resolution_date": q.resolution_date.isoformat(),
                "ground_truth": q.ground_truth,
            }) + "\n")


def write_corpus(path: Path, start=date(2026, 1, 1), days=10, per_day=3):
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for offset in range(days):
            day = start + timedelta(days=offset)
            for i in range(per_day):
                fh.write(json.dumps(article_record(n, day)) + "\n")
                n += 1
