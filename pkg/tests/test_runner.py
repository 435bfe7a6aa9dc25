import csv
import json
from datetime import date

import pytest
import yaml

from replaysim import errors
from replaysim.config import config_from_dict, load_config, load_questions
from replaysim.protocol import NEXT_DAY, SUBMIT
from replaysim.runner import diff_run_dirs, execute_replay, execute_run

from helpers import make_question, write_corpus, write_questions

START = date(2026, 1, 1)


def script_line(tool, arguments, req_id):
    return json.dumps({"id": req_id, "tool_name": tool, "arguments": arguments})


def write_setup(root, agents=("agent-1",), script_lines=None, extra_config=None):
    """Materialize questions, corpus, scripts and config.yaml under root."""
    questions = [
        make_question("q1", "Who wins the race?", resolve_day=date(2026, 1, 4), truth="Alice"),
        make_question("q2", "Who wins the cup?", resolve_day=date(2026, 1, 6), truth="Rovers"),
    ]
    write_questions(root / "questions.jsonl", questions)
    write_corpus(root / "corpus.jsonl", start=START, days=8, per_day=2)
    scripts = {}
    for agent in agents:
        lines = (script_lines or {}).get(agent, [])
        path = root / f"script-{agent}.jsonl"
        path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        scripts[agent] = path.name
    config = {
        "start_date": START.isoformat(),
        "questions": "questions.jsonl",
        "corpus": "corpus.jsonl",
        "agents": list(agents),
        "scripts": scripts,
    }
    config.update(extra_config or {})
    (root / "config.yaml").write_text(yaml.safe_dump(config), encoding="utf-8")
    return root / "config.yaml"


DEFAULT_SCRIPT = [
    script_line(SUBMIT, {"question_id": "q1", "outcomes": {"Alice": 0.8, "Bob": 0.1}}, 1),
    script_line(SUBMIT, {"question_id": "q2", "outcomes": {"Rovers": 0.6}}, 2),
    script_line(NEXT_DAY, {}, 3),
    script_line(SUBMIT, {"question_id": "q2", "outcomes": {"Rovers": 0.9}}, 4),
    script_line(NEXT_DAY, {}, 5),
]


@pytest.fixture
def finished_run(tmp_path):
    config_path = write_setup(
        tmp_path, script_lines={"agent-1": DEFAULT_SCRIPT}
    )
    run_dir = tmp_path / "run"
    execute_run(load_config(config_path), run_dir)
    return run_dir


class TestExecuteRun:
    def test_run_directory_layout(self, finished_run):
        assert (finished_run / "config.yaml").exists()
        assert (finished_run / "transcript.jsonl").exists()
        assert (finished_run / "metrics.csv").exists()
        assert (finished_run / "report.json").exists()
        snapshots = sorted(p.name for p in (finished_run / "snapshots" / "agent-1").iterdir())
        assert snapshots[0] == "market-2026-01-01.csv"
        assert "market-2026-01-07.csv" in snapshots

    def test_predictions_capture_daily_submissions(self, finished_run):
        day0 = json.loads(
            (finished_run / "predictions" / "agent-1" / "2026-01-01.json").read_text()
        )
        assert [p["qid"] for p in day0] == ["q1", "q2"]
        assert day0[0]["outcomes"] == {"Alice": 0.8, "Bob": 0.1}
        day1 = json.loads(
            (finished_run / "predictions" / "agent-1" / "2026-01-02.json").read_text()
        )
        assert [p["qid"] for p in day1] == ["q2"]

    def test_metrics_series(self, finished_run):
        with open(finished_run / "metrics.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["date"] == "2026-01-01"
        assert rows[0]["num_predictions"] == "0"
        assert rows[-1]["num_resolved"] == "2"
        assert float(rows[-1]["mean_bss"]) > 0

    def test_report_final_metrics(self, finished_run):
        report = json.loads((finished_run / "report.json").read_text())
        final = report["final"]["agent-1"]
        # q1: 1-(0.8-1)^2-0.01 = 0.95; q2: 1-(0.9-1)^2 = 0.99
        assert final["mean_bss"] == pytest.approx((0.95 + 0.99) / 2)
        assert final["accuracy"] == pytest.approx(1.0)
        assert report["per_question_bss"]["agent-1"]["q1"] == pytest.approx(0.95)
        assert report["terminated"] is True
        assert report["action_count"] > 0

    def test_transcript_records_every_request(self, finished_run):
        lines = (finished_run / "transcript.jsonl").read_text().splitlines()
        exchanges = [json.loads(l) for l in lines]
        tools = [e["request"]["tool_name"] for e in exchanges]
        assert tools.count(SUBMIT) == 3
        assert all("response" in e for e in exchanges)


class TestReplay:
    def test_replay_is_byte_identical(self, finished_run, tmp_path):
        out = tmp_path / "replayed"
        result = execute_replay(finished_run, out)
        assert result["identical"], result["diffs"]
        assert result["compared"] > 5

    def test_diff_detects_tampering(self, finished_run, tmp_path):
        out = tmp_path / "replayed"
        execute_replay(finished_run, out)
        target = out / "metrics.csv"
        target.write_text(target.read_text().replace("0.9", "0.8"), encoding="utf-8")
        result = diff_run_dirs(finished_run, out)
        assert not result["identical"]
        assert any("metrics.csv" in d for d in result["diffs"])

    def test_missing_transcript_is_corrupt(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(errors.TranscriptCorrupt):
            execute_replay(tmp_path / "empty", tmp_path / "out")


class TestMultiAgentRun:
    def test_report_includes_convergence(self, tmp_path):
        scripts = {
            "a1": [
                script_line(SUBMIT, {"question_id": "q1", "outcomes": {"Alice": 0.9}}, 1),
            ],
            "a2": [
                script_line(SUBMIT, {"question_id": "q1", "outcomes": {"Bob": 0.9}}, 1),
            ],
        }
        config_path = write_setup(
            tmp_path,
            agents=("a1", "a2"),
            script_lines=scripts,
            extra_config={"mode": "multi-agent"},
        )
        run_dir = tmp_path / "run"
        execute_run(load_config(config_path), run_dir)
        report = json.loads((run_dir / "report.json").read_text())
        assert report["tw_peer"]["a1"] + report["tw_peer"]["a2"] == pytest.approx(0.0, abs=1e-9)
        assert report["tv_by_day"]["2026-01-01"] == pytest.approx(0.9)


class TestAblationsViaConfig:
    def test_fixed_initial_forecasts(self, tmp_path):
        fixed = {"q1": {"Alice": 0.7}, "q2": {"Rovers": 0.5}}
        (tmp_path / "fixed.json").write_text(json.dumps(fixed), encoding="utf-8")
        config_path = write_setup(
            tmp_path, extra_config={"fixed_initial_forecasts": "fixed.json"}
        )
        run_dir = tmp_path / "run"
        execute_run(load_config(config_path), run_dir)
        day0 = (run_dir / "snapshots" / "agent-1" / "market-2026-01-01.csv").read_text()
        assert '""Alice"": 0.7' in day0 or '"Alice": 0.7' in day0

    def test_freeze_corpus_reports_zero_new_articles(self, tmp_path):
        config_path = write_setup(tmp_path, extra_config={"freeze_corpus_at_day0": True})
        run_dir = tmp_path / "run"
        execute_run(load_config(config_path), run_dir)
        with open(run_dir / "metrics.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert all(r["new_article_count"] == "0" for r in rows)


class TestConfig:
    def test_round_trip_through_dict(self, tmp_path):
        config_path = write_setup(tmp_path)
        cfg = load_config(config_path)
        again = config_from_dict(cfg.to_dict())
        assert again.start_date == cfg.start_date
        assert again.agents == cfg.agents
        assert again.max_outcomes == cfg.max_outcomes

    def test_missing_keys(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("start_date: 2026-01-01\n", encoding="utf-8")
        with pytest.raises(errors.ConfigInvalid):
            load_config(path)

    def test_unknown_mode(self, tmp_path):
        with pytest.raises(errors.ConfigInvalid):
            config_from_dict(
                {
                    "start_date": "2026-01-01",
                    "questions": "q.jsonl",
                    "corpus": "c.jsonl",
                    "mode": "swarm",
                }
            )

    def test_relative_paths_resolved_against_config_dir(self, tmp_path):
        config_path = write_setup(tmp_path)
        cfg = load_config(config_path)
        assert cfg.questions_path == tmp_path / "questions.jsonl"


class TestLoadQuestions:
    def test_valid_file(self, tmp_path):
        write_questions(tmp_path / "q.jsonl", [make_question("q1")])
        questions = load_questions(tmp_path / "q.jsonl")
        assert questions[0].qid == "q1"
        assert questions[0].ground_truth == "Alice"

    def test_bad_line_reports_location(self, tmp_path):
        path = tmp_path / "q.jsonl"
        path.write_text('{"qid": "q1"}\n', encoding="utf-8")
        with pytest.raises(errors.QuestionFileInvalid, match="q.jsonl:1"):
            load_questions(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(errors.QuestionFileInvalid):
            load_questions(tmp_path / "nope.jsonl")
