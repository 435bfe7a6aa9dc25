"""Console entry point: run a scripted baseline against a live simulation
socket. Question metadata comes from a JSONL file (qid, title, optional
labels list for the uniform policy)."""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from .baselines import POLICIES, QuestionSpec, UniformTopK, run_baseline
from .client import ClientSession, ProtocolError


def load_question_specs(path: Path) -> list[QuestionSpec]:
    specs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            specs.append(
                QuestionSpec(
                    qid=str(rec["qid"]),
                    title=rec.get("title", ""),
                    labels=rec.get("labels", rec.get("options", [])),
                )
            )
    return specs


@click.command()
@click.option("--socket", "socket_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--questions", "questions_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--policy", type=click.Choice(sorted(POLICIES)), default="abstainer", show_default=True)
@click.option("--agent", "agent_id", default=None, help="agent id to act as (server default otherwise)")
@click.option("--k", type=int, default=3, show_default=True, help="candidate count for uniform-top-k")
@click.option("--max-days", type=int, default=365, show_default=True)
def main(socket_path: Path, questions_path: Path, policy: str, agent_id, k: int, max_days: int):
    """Run one baseline agent to completion and print its result as JSON."""
    agent = UniformTopK(k=k) if policy == "uniform-top-k" else POLICIES[policy]()
    specs = load_question_specs(questions_path)
    try:
        with ClientSession.connect(socket_path, agent_id=agent_id) as session:
            result = run_baseline(agent, session, specs, max_days=max_days)
    except ProtocolError as exc:
        click.echo(f"error [{exc.code}]: {exc}", err=True)
        sys.exit(1)
    click.echo(json.dumps(dataclasses.asdict(result), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
