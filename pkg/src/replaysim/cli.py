"""Operator command line: ingest corpora, run/replay simulations, serve the
tool protocol for external agents, and emit metric reports as CSV series."""

from __future__ import annotations

import csv
import json
import sys
import threading
from pathlib import Path

import click

from . import errors, scoring
from .config import load_config
from .corpus import CorpusStore, load_jsonl_records
from .runner import RunRecorder, build_environment, execute_replay, execute_run

EXIT_CODES = {
    "ConfigInvalid": 2,
    "CorpusMissing": 3,
    "QuestionFileInvalid": 4,
    "TranscriptCorrupt": 5,
    "EmptyIntersection": 6,
}


def _fail(exc: errors.SimError):
    click.echo(f"error [{exc.code}]: {exc}", err=True)
    sys.exit(EXIT_CODES.get(exc.code, 1))


@click.group()
def main():
    """Deterministic chronological-replay environment for forecasting agents."""


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def ingest(input_path: Path, out_path: Path):
    """Deduplicate and index a JSONL article stream; print the ingest report."""
    store = CorpusStore()
    report = store.ingest(load_jsonl_records(input_path))
    out_path.mkdir(parents=True, exist_ok=True)
    with open(out_path / "articles.jsonl", "w", encoding="utf-8") as fh:
        for d in store.dates():
            for a in store.articles_on(d):
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
    click.echo(
        f"accepted={report.accepted} duplicates={report.duplicates} "
        f"undated={report.undated} malformed={report.malformed}"
    )


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def run(config_path: Path, out_dir: Path):
    """Execute a full scripted simulation into a run directory."""
    try:
        cfg = load_config(config_path)
        execute_run(cfg, out_dir)
    except errors.SimError as exc:
        _fail(exc)
    click.echo(f"run complete: {out_dir}")


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
def replay(run_dir: Path, out_dir: Path):
    """Re-execute a run from its transcript and verify byte-identical output."""
    if out_dir is None:
        out_dir = run_dir.parent / (run_dir.name + "-replay")
    try:
        result = execute_replay(run_dir, out_dir)
    except errors.SimError as exc:
        _fail(exc)
    click.echo(json.dumps(result, indent=2))
    if not result["identical"]:
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--socket", "socket_path", type=click.Path(path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def serve(config_path: Path, socket_path: Path, out_dir: Path):
    """Serve the tool protocol on a UNIX socket until the simulation ends."""
    try:
        cfg = load_config(config_path)
        engine, server = build_environment(cfg, Path(out_dir))
        recorder = RunRecorder(Path(out_dir), cfg, engine, server)
    except errors.SimError as exc:
        _fail(exc)
    done = threading.Event()
    previous = server.on_day_advanced

    def on_advanced(feedback):
        if previous is not None:
            previous(feedback)
        if engine.terminated:
            done.set()

    server.on_day_advanced = on_advanced
    handle = server.serve_socket(Path(socket_path))
    click.echo(f"serving on {socket_path}", err=True)
    done.wait()
    recorder.finalize()
    handle.stop()
    click.echo(f"run complete: {out_dir}")


@main.command()
@click.argument("run_dirs", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--resamples", type=int, default=10000, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
@click.option("--agent", "agent_id", default=None, help="agent to score (default: first agent of each run)")
def report(run_dirs, seed: int, resamples: int, out_dir: Path, agent_id):
    """Aggregate one or more run directories into metric tables with
    bootstrap bands over questions and runs."""
    runs = []
    for rd in run_dirs:
        report_path = Path(rd) / "report.json"
        if not report_path.exists():
            _fail(errors.TranscriptCorrupt(f"missing report.json in {rd}"))
        runs.append(json.loads(report_path.read_text(encoding="utf-8")))

    per_run_scores: list[dict[str, float]] = []
    for data in runs:
        agents = sorted(data["per_question_bss"])
        chosen = agent_id or (agents[0] if agents else None)
        per_run_scores.append(data["per_question_bss"].get(chosen, {}))
    common = set.intersection(*(set(s) for s in per_run_scores)) if per_run_scores else set()
    if not common:
        _fail(errors.EmptyIntersection("no common resolved questions across runs"))
    matrix = {qid: [s[qid] for s in per_run_scores] for qid in sorted(common)}
    try:
        mean, band = scoring.bootstrap_band(matrix, n_resamples=resamples, seed=seed)
    except errors.SimError as exc:
        _fail(exc)

    summary = {
        "runs": [str(r) for r in run_dirs],
        "n_common_questions": len(common),
        "bootstrap": {"seed": seed, "resamples": resamples, "rng": scoring.BOOTSTRAP_RNG},
        "mean_bss": mean,
        "band_std": band,
        "final_per_run": [data["final"] for data in runs],
        "tw_peer": [data.get("tw_peer") for data in runs],
    }
    click.echo(json.dumps(summary, indent=2, sort_keys=True))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        # daily series as plot-ready CSV, one file per run
        for i, rd in enumerate(run_dirs):
            metrics = Path(rd) / "metrics.csv"
            if metrics.exists():
                (out_dir / f"daily-run{i}.csv").write_bytes(metrics.read_bytes())
        with open(out_dir / "bands.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "mean", "band_std"])
            writer.writerow(["final_bss", f"{mean:.9f}", f"{band:.9f}"])


if __name__ == "__main__":
    main()
