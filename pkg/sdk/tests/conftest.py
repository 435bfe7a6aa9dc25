"""Fixtures that host a real simulation server on a UNIX socket.

The SDK under test talks to it exclusively through the wire protocol; the
server package is imported here only to stand the environment up.
"""

import json
from datetime import date, timedelta
from pathlib import Path

import pytest

from replaysim.config import config_from_dict
from replaysim.runner import RunRecorder, build_environment

START = date(2026, 1, 1)


def write_world(root: Path, n_questions=5, horizon_days=7, agents=("agent-1",), mode="native"):
    """Questions, corpus, and config for a small simulation; returns the
    parsed RunConfig."""
    with open(root / "questions.jsonl", "w", encoding="utf-8") as fh:
        for i in range(n_questions):
            resolve = START + timedelta(days=3 + (i % (horizon_days - 3)))
            fh.write(
                json.dumps(
                    {
                        "qid": f"q{i}",
                        "title": f"Winner of contest {i}?",
                        "background": "bg",
                        "resolution_criteria": "rc",
                        "answer_type": "String (Name)",
                        "open_date": START.isoformat(),
                        "resolution_date": resolve.isoformat(),
                        "ground_truth": f"Candidate {i}",
                    }
                )
                + "\n"
            )
    with open(root / "corpus.jsonl", "w", encoding="utf-8") as fh:
        n = 0
        for offset in range(horizon_days + 1):
            day = START + timedelta(days=offset)
            for i in range(n_questions):
                fh.write(
                    json.dumps(
                        {
                            "source": "wire",
                            "url": f"https://example.com/{day.isoformat()}/{n}",
                            "published_date": day.isoformat(),
                            "title": f"contest {i} report",
                            "body": f"Winner of contest {i} looks like Candidate {i} again today",
                        }
                    )
                    + "\n"
                )
                n += 1
    return config_from_dict(
        {
            "start_date": START.isoformat(),
            "end_date": (START + timedelta(days=horizon_days)).isoformat(),
            "questions": "questions.jsonl",
            "corpus": "corpus.jsonl",
            "agents": list(agents),
            "mode": mode,
        },
        base=root,
    )


@pytest.fixture
def sim_server(tmp_path):
    """Factory yielding (socket_path, engine, run_dir) for a live server."""
    handles = []

    def start(mode="native", agents=("agent-1",), n_questions=5, horizon_days=7, record=False):
        config = write_world(
            tmp_path, n_questions=n_questions, horizon_days=horizon_days,
            agents=agents, mode=mode,
        )
        run_dir = tmp_path / "run"
        engine, server = build_environment(config, run_dir)
        recorder = RunRecorder(run_dir, config, engine, server) if record else None
        socket_path = tmp_path / "sim.sock"
        handle = server.serve_socket(socket_path)
        handles.append((handle, recorder))
        return socket_path, engine, run_dir

    yield start
    for handle, recorder in handles:
        if recorder is not None:
            recorder.finalize()
        handle.stop()
