#!/usr/bin/env python3
"""Generate a self-contained toy world: dated articles, resolvable questions,
a scripted agent, and a config.yaml wired together. Useful as input for
`replaysim run` and as a template for real datasets."""

import argparse
import json
import random
from datetime import date, timedelta
from pathlib import Path

import yaml

START = date(2026, 1, 1)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("toy-world"))
    parser.add_argument("--questions", type=int, default=10)
    parser.add_argument("--days", type=int, default=14)
    parser.add_argument("--articles-per-day", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rnd = random.Random(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)

    candidates = {
        i: [f"Candidate {i}A", f"Candidate {i}B", f"Candidate {i}C"]
        for i in range(args.questions)
    }
    truths = {i: rnd.choice(candidates[i]) for i in range(args.questions)}

    with open(args.out / "questions.jsonl", "w", encoding="utf-8") as fh:
        for i in range(args.questions):
            resolve = START + timedelta(days=rnd.randint(3, args.days - 1))
            fh.write(json.dumps({
                "qid": f"q{i}",
                "title": f"Who wins contest {i}?",
                "background": f"Contest {i} runs through {resolve.isoformat()}.",
                "resolution_criteria": "The officially declared winner.",
                "answer_type": "String (Name)",
                "open_date": START.isoformat(),
                "resolution_date": resolve.isoformat(),
                "ground_truth": truths[i],
                "labels": candidates[i],
            }) + "\n")

    n = 0
    with open(args.out / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for offset in range(args.days):
            day = START + timedelta(days=offset)
            for _ in range(args.articles_per_day):
                i = rnd.randrange(args.questions)
                # truth signal strengthens as the resolution date nears
                leader = truths[i] if rnd.random() < 0.4 + 0.04 * offset else rnd.choice(candidates[i])
                fh.write(json.dumps({
                    "source": "toy-wire",
                    "url": f"https://example.com/{day.isoformat()}/{n}",
                    "published_date": day.isoformat(),
                    "title": f"contest {i} daily report",
                    "body": f"Who wins contest {i}? Observers say {leader} leads the field today.",
                }) + "\n")
                n += 1

    # scripted agent: submits a confident forecast per question on day 0
    with open(args.out / "script-agent-1.jsonl", "w", encoding="utf-8") as fh:
        req = 0
        for i in range(args.questions):
            req += 1
            guess = truths[i] if rnd.random() < 0.7 else rnd.choice(candidates[i])
            fh.write(json.dumps({
                "id": req,
                "tool_name": "mcp__forecast__submit_forecasts",
                "arguments": {"question_id": f"q{i}", "outcomes": {guess: 0.8}},
            }) + "\n")

    config = {
        "start_date": START.isoformat(),
        "end_date": (START + timedelta(days=args.days)).isoformat(),
        "questions": "questions.jsonl",
        "corpus": "corpus.jsonl",
        "agents": ["agent-1"],
        "scripts": {"agent-1": "script-agent-1.jsonl"},
    }
    (args.out / "config.yaml").write_text(yaml.safe_dump(config), encoding="utf-8")
    print(f"wrote {args.out}/ (questions={args.questions}, days={args.days}, articles={n})")
    print(f"next: replaysim run --config {args.out}/config.yaml --out {args.out}/run")


if __name__ == "__main__":
    main()
