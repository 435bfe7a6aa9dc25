import io
import json
from datetime import date

import pytest
from hypothesis import given, settings, strategies as st

from replaysim import errors, protocol
from replaysim.engine import EngineConfig, SimulationEngine
from replaysim.protocol import (
    ALL_TOOLS,
    MEMORY_TOOLS,
    MODE_TOOLS,
    NEXT_DAY,
    PHASE_TOOLS,
    SEARCH,
    SUBMIT,
    BudgetConfig,
    ToolServer,
    encode_frame,
    read_frame,
)
from replaysim.templates import TEMPLATES, render_prompt

from helpers import make_question

START = date(2026, 1, 1)


def build_server(toy_corpus, mode="native", agents=("agent",), budget=None, **cfg):
    questions = [
        make_question("q1", "Who wins the race?", resolve_day=date(2026, 1, 4), truth="Alice"),
        make_question("q2", "Who wins the cup?", resolve_day=date(2026, 1, 6), truth="Rovers"),
    ]
    config = EngineConfig(start_date=START, agents=tuple(agents), **cfg)
    engine = SimulationEngine(config, questions, toy_corpus)
    return ToolServer(engine, mode=mode, budget_config=budget or BudgetConfig())


def call(server, tool, arguments=None, agent=None, req_id=1):
    request = {"id": req_id, "tool_name": tool, "arguments": arguments or {}}
    if agent is not None:
        request["agent"] = agent
    return server.handle(request)


class TestFraming:
    def test_round_trip(self):
        message = {"id": 1, "tool_name": SEARCH, "arguments": {"query": "news"}}
        stream = io.BytesIO(encode_frame(message))
        assert read_frame(stream) == message

    def test_multiple_frames_in_sequence(self):
        stream = io.BytesIO(encode_frame({"a": 1}) + encode_frame({"b": 2}))
        assert read_frame(stream) == {"a": 1}
        assert read_frame(stream) == {"b": 2}

    def test_length_prefix_is_big_endian_u32(self):
        frame = encode_frame({})
        assert frame[:4] == (len(frame) - 4).to_bytes(4, "big")

    def test_truncated_frame_returns_none(self):
        frame = encode_frame({"a": 1})
        assert read_frame(io.BytesIO(frame[:-2])) is None
        assert read_frame(io.BytesIO(b"")) is None

    def test_unicode_payload(self):
        message = {"query": "élection présidentielle ❓"}
        assert read_frame(io.BytesIO(encode_frame(message))) == message


class TestPermissionTable:
    def test_native_mode_has_no_memory_tools(self, toy_corpus):
        server = build_server(toy_corpus, mode="native")
        for tool in MEMORY_TOOLS:
            response = call(server, tool, {"qid": "q1", "memory": "m"})
            assert not response["ok"]
            assert response["error"]["code"] == "UnknownTool"

    def test_unknown_tool_name(self, toy_corpus):
        server = build_server(toy_corpus)
        response = call(server, "mcp__forecast__does_not_exist")
        assert response["error"]["code"] == "UnknownTool"

    def test_memory_phase_blocks_search_and_submit(self, toy_corpus):
        server = build_server(toy_corpus, mode="custom-harness")
        first = call(server, NEXT_DAY)
        assert first["payload"]["phase"] == "memory"
        for tool, args in ((SEARCH, {"query": "news"}), (SUBMIT, {"question_id": "q1", "outcomes": {"A": 0.5}})):
            response = call(server, tool, args)
            assert response["error"]["code"] == "PhaseViolation"

    def test_memory_tools_allowed_in_memory_phase(self, toy_corpus):
        server = build_server(toy_corpus, mode="custom-harness")
        call(server, NEXT_DAY)
        response = call(
            server,
            protocol.MEM_ADD,
            {"qid": "q1", "question": "Who wins the race?", "memory": "note"},
        )
        assert response["ok"]

    @given(
        mode=st.sampled_from(sorted(MODE_TOOLS)),
        phase=st.sampled_from(["normal", "memory"]),
        tool=st.sampled_from(sorted(ALL_TOOLS)),
    )
    @settings(max_examples=200, deadline=None)
    def test_table_is_exhaustive_and_consistent(self, mode, phase, tool):
        # every phase-allowed tool must exist in the mode, and the memory
        # phase only exists for the custom harness
        if (mode, phase) not in PHASE_TOOLS:
            assert phase == "memory" and mode != "custom-harness"
            return
        allowed = PHASE_TOOLS[(mode, phase)]
        assert allowed <= MODE_TOOLS[mode]
        if tool in allowed:
            assert tool in MODE_TOOLS[mode]


class TestSubmitTool:
    def test_single_forecast_accepted(self, toy_corpus):
        server = build_server(toy_corpus)
        response = call(server, SUBMIT, {"question_id": "q1", "outcomes": {"Alice": 0.7}})
        assert response["ok"]
        assert response["payload"]["forecast"] == {"Alice": 0.7}
        assert server.submissions_today["agent"][0]["qid"] == "q1"

    def test_batch_forecasts_rejected(self, toy_corpus):
        server = build_server(toy_corpus)
        response = call(
            server,
            SUBMIT,
            {"forecasts": [{"question_id": "q1", "outcomes": {"A": 0.5}}]},
        )
        assert response["error"]["code"] == "MalformedRequest"
        assert "exactly one forecast" in response["error"]["message"]

    def test_validation_errors_surface_with_codes(self, toy_corpus):
        server = build_server(toy_corpus)
        cases = [
            ({"question_id": "q1", "outcomes": {"A": 0.7, "B": 0.7}}, "SumExceedsOne"),
            ({"question_id": "q1", "outcomes": {f"o{i}": 0.1 for i in range(6)}}, "TooManyOutcomes"),
            ({"question_id": "q1", "outcomes": {"Unknown": 0.5}}, "PlaceholderLabel"),
            ({"question_id": "q1", "outcomes": {"A": -0.2}}, "NegativeProbability"),
            ({"question_id": "q9", "outcomes": {"A": 0.5}}, "UnknownQuestion"),
        ]
        for args, code in cases:
            assert call(server, SUBMIT, args)["error"]["code"] == code


class TestSearchTool:
    def test_gated_results(self, toy_corpus):
        server = build_server(toy_corpus)
        response = call(server, SEARCH, {"query": "news", "to_date": "2026-03-01", "k": 50})
        assert response["ok"]
        dates = {r["published_date"] for r in response["payload"]["results"]}
        assert dates <= {"2026-01-01"}

    def test_bad_date_rejected(self, toy_corpus):
        server = build_server(toy_corpus)
        response = call(server, SEARCH, {"query": "news", "from_date": "not-a-date"})
        assert response["error"]["code"] == "MalformedRequest"


class TestBudget:
    def test_exhaustion_blocks_everything_but_next_day(self, toy_corpus):
        server = build_server(toy_corpus, budget=BudgetConfig(max_actions=1))
        assert call(server, SEARCH, {"query": "news"})["ok"]
        blocked = call(server, SEARCH, {"query": "news"})
        assert blocked["error"]["code"] == "BudgetExhausted"
        ended = call(server, NEXT_DAY)
        assert ended["ok"]
        assert ended["payload"]["advanced"]

    def test_budget_resets_on_new_day(self, toy_corpus):
        server = build_server(toy_corpus, budget=BudgetConfig(max_actions=2))
        call(server, SEARCH, {"query": "news"})
        call(server, NEXT_DAY)
        assert call(server, SEARCH, {"query": "news"})["ok"]

    def test_envelope_reports_budget(self, toy_corpus):
        server = build_server(toy_corpus, budget=BudgetConfig(max_actions=5))
        response = call(server, SEARCH, {"query": "news"})
        assert response["budget"]["actions_remaining"] == 4
        assert response["budget"]["context_tokens_remaining"] < BudgetConfig().max_context_tokens

    def test_token_exhaustion_closes_session(self, toy_corpus):
        server = build_server(toy_corpus, budget=BudgetConfig(max_context_tokens=5))
        first = call(server, SEARCH, {"query": "news"})
        assert first["budget"]["session_end"]
        assert call(server, SEARCH, {"query": "news"})["error"]["code"] == "BudgetExhausted"


class TestDayAdvance:
    def test_single_agent_advances_immediately(self, toy_corpus):
        server = build_server(toy_corpus)
        response = call(server, NEXT_DAY)
        assert response["payload"]["advanced"]
        assert response["payload"]["feedback"]["date"] == "2026-01-02"
        assert server.engine.today == date(2026, 1, 2)

    def test_multi_agent_barrier(self, toy_corpus):
        server = build_server(toy_corpus, agents=("a1", "a2"))
        first = call(server, NEXT_DAY, agent="a1")
        assert first["payload"] == {"advanced": False, "waiting": True}
        assert server.engine.today == START
        blocked = call(server, SEARCH, {"query": "news"}, agent="a1")
        assert blocked["error"]["code"] == "PhaseViolation"
        second = call(server, NEXT_DAY, agent="a2")
        assert second["payload"]["advanced"]
        assert server.engine.today == date(2026, 1, 2)

    def test_feedback_reports_resolutions(self, toy_corpus):
        server = build_server(toy_corpus)
        call(server, SUBMIT, {"question_id": "q1", "outcomes": {"Alice": 1.0}})
        for _ in range(3):
            call(server, NEXT_DAY)
        response = call(server, NEXT_DAY)
        resolved = response["payload"]["feedback"]["resolved"]
        assert [e["qid"] for e in resolved] == ["q1"]
        assert resolved[0]["bss"] == pytest.approx(1.0)
        assert resolved[0]["ground_truth"] == "Alice"

    def test_terminated_simulation_rejects_further_days(self, toy_corpus):
        server = build_server(toy_corpus)
        while not server.engine.terminated:
            call(server, NEXT_DAY)
        response = call(server, NEXT_DAY)
        assert response["error"]["code"] == "AlreadyTerminated"

    def test_submissions_cleared_after_advance(self, toy_corpus):
        server = build_server(toy_corpus)
        call(server, SUBMIT, {"question_id": "q1", "outcomes": {"Alice": 0.5}})
        call(server, NEXT_DAY)
        assert server.submissions_today["agent"] == []


class TestMalformed:
    def test_missing_tool_name(self, toy_corpus):
        server = build_server(toy_corpus)
        response = server.handle({"id": 9, "arguments": {}})
        assert response["error"]["code"] == "MalformedRequest"
        assert response["id"] == 9

    def test_unknown_agent(self, toy_corpus):
        server = build_server(toy_corpus)
        response = call(server, SEARCH, {"query": "n"}, agent="ghost")
        assert response["error"]["code"] == "MalformedRequest"

    def test_non_object_arguments(self, toy_corpus):
        server = build_server(toy_corpus)
        response = server.handle({"id": 1, "tool_name": SEARCH, "arguments": [1, 2]})
        assert response["error"]["code"] == "MalformedRequest"


class TestTranscriptSink:
    def test_every_exchange_recorded(self, toy_corpus):
        records = []
        server = build_server(toy_corpus)
        server.transcript_sink = records.append
        call(server, SEARCH, {"query": "news"})
        call(server, "bogus_tool")
        assert len(records) == 2
        assert records[0]["request"]["tool_name"] == SEARCH
        assert not records[1]["response"]["ok"]


class TestPromptTemplates:
    def test_registry_names(self):
        assert set(TEMPLATES) >= {"native", "custom_harness", "multi_agent"}

    def test_render_fills_all_placeholders(self):
        rendered = render_prompt(
            "native",
            {
                "current_date": "2026-01-01",
                "next_date": "2026-01-02",
                "timegap_days": "1",
                "num_questions": "2",
                "num_active": "2",
                "num_resolved": "0",
                "max_outcomes_per_question": "5",
                "optional_resolution_cadence_note": "",
            },
        )
        assert "2026-01-01" in rendered
        assert "<current_date>" not in rendered

    def test_missing_field_detected(self):
        with pytest.raises(errors.MissingField):
            render_prompt("native", {})

    def test_unknown_template(self):
        with pytest.raises(errors.UnknownTemplate):
            render_prompt("nope", {})
