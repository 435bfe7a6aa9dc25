"""Session-scoped wire protocol exposing the environment tools.

Transport is length-prefixed JSON (4-byte big-endian length, then a UTF-8
JSON object) over stdio or a local UNIX socket, so sandboxed child processes
can speak it without newline escaping. The dispatch core is transport-free;
tests and the replay path drive `ToolServer.handle` directly.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import BinaryIO, Callable, Optional

from . import errors
from .engine import SimulationEngine
from .memory import Budget, ChargeAdvisory, DayGate, MemoryStore, charge

TOOL_PREFIX = "mcp__forecast__"

SEARCH = TOOL_PREFIX + "search_news"
SUBMIT = TOOL_PREFIX + "submit_forecasts"
NEXT_DAY = TOOL_PREFIX + "next_day"
MEM_ADD = TOOL_PREFIX + "mem_add"
MEM_UPDATE = TOOL_PREFIX + "mem_update"
MEM_DELETE = TOOL_PREFIX + "mem_delete"
META_NEW = TOOL_PREFIX + "memory_new"
META_UPDATE = TOOL_PREFIX + "memory_update"
META_DELETE = TOOL_PREFIX + "memory_delete"
META_RETRIEVE = TOOL_PREFIX + "memory_retrieve"

MEMORY_TOOLS = frozenset(
    {MEM_ADD, MEM_UPDATE, MEM_DELETE, META_NEW, META_UPDATE, META_DELETE, META_RETRIEVE}
)
ALL_TOOLS = frozenset({SEARCH, SUBMIT, NEXT_DAY}) | MEMORY_TOOLS

# Static permission table: (mode, phase) -> tools that exist and are callable.
# Tools absent from a mode are UnknownTool; tools present but not callable in
# the current phase are PhaseViolation.
MODE_TOOLS = {
    "native": frozenset({SEARCH, SUBMIT, NEXT_DAY}),
    "multi-agent": frozenset({SEARCH, SUBMIT, NEXT_DAY}),
    "custom-harness": ALL_TOOLS,
}
PHASE_TOOLS = {
    ("native", "normal"): MODE_TOOLS["native"],
    ("multi-agent", "normal"): MODE_TOOLS["multi-agent"],
    ("custom-harness", "normal"): ALL_TOOLS,
    ("custom-harness", "memory"): MEMORY_TOOLS | {NEXT_DAY},
}


def count_tokens(payload) -> int:
    """Whitespace-token proxy for context accounting over tool payloads."""
    return len(json.dumps(payload).split())


def encode_frame(message: dict) -> bytes:
    body = json.dumps(message, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack(">I", len(body)) + body


def read_frame(stream: BinaryIO) -> Optional[dict]:
    header = stream.read(4)
    if not header or len(header) < 4:
        return None
    (length,) = struct.unpack(">I", header)
    body = b""
    while len(body) < length:
        part = stream.read(length - len(body))
        if not part:
            return None
        body += part
    return json.loads(body.decode("utf-8"))


def _read_frame_socket(conn: socket.socket) -> Optional[dict]:
    chunks = b""
    while len(chunks) < 4:
        part = conn.recv(4 - len(chunks))
        if not part:
            return None
        chunks += part
    (length,) = struct.unpack(">I", chunks)
    body = b""
    while len(body) < length:
        part = conn.recv(length - len(body))
        if not part:
            return None
        body += part
    return json.loads(body.decode("utf-8"))


@dataclass
class BudgetConfig:
    max_actions: int = 1000
    max_context_tokens: int = 1_000_000
    submit_reserve_tokens: int = 0
    force_submit_threshold_tokens: int = 0

    def fresh(self) -> Budget:
        return Budget(
            actions_remaining=self.max_actions,
            context_tokens_remaining=self.max_context_tokens,
            submit_reserve=self.submit_reserve_tokens,
            force_submit_threshold=self.force_submit_threshold_tokens,
        )


@dataclass
class Session:
    agent_id: str
    budget: Budget
    gate: DayGate
    closed: bool = False

    @property
    def day_phase(self) -> str:
        return "memory" if self.gate.in_memory_phase else "normal"


class ToolServer:
    """Dispatches tool requests against one simulation.

    Requests are processed strictly in order (a single lock serializes all
    engine mutations). One live session per (agent, day); budgets and phases
    reset when the simulation day advances.
    """

    def __init__(
        self,
        engine: SimulationEngine,
        mode: str = "native",
        budget_config: Optional[BudgetConfig] = None,
        memory_stores: Optional[dict[str, MemoryStore]] = None,
        workspace_roots: Optional[dict[str, Path]] = None,
        transcript_sink: Optional[Callable[[dict], None]] = None,
        on_day_advanced: Optional[Callable[[dict], None]] = None,
    ):
        if mode not in MODE_TOOLS:
            raise errors.ConfigInvalid(f"unknown mode {mode!r}")
        self.engine = engine
        self.mode = mode
        self.budget_config = budget_config or BudgetConfig()
        self.memory_stores = memory_stores or {
            a: MemoryStore(known_qids=set(engine.questions))
            for a in engine.config.agents
        }
        self.workspace_roots = workspace_roots or {}
        self.transcript_sink = transcript_sink
        self.on_day_advanced = on_day_advanced
        self._lock = threading.Lock()
        gated = mode == "custom-harness"
        self.sessions: dict[str, Session] = {
            a: Session(a, self.budget_config.fresh(), DayGate(enabled=gated))
            for a in engine.config.agents
        }
        self._waiting_for_advance: set[str] = set()
        self.submissions_today: dict[str, list[dict]] = {
            a: [] for a in engine.config.agents
        }

    # --- dispatch --------------------------------------------------------

    def handle(self, request: dict) -> dict:
        with self._lock:
            response = self._handle_locked(request)
        if self.transcript_sink is not None:
            self.transcript_sink({"request": request, "response": response})
        return response

    def _handle_locked(self, request: dict) -> dict:
        req_id = request.get("id")
        try:
            if not isinstance(request, dict) or "tool_name" not in request:
                raise errors.MalformedRequest("missing tool_name")
            tool = request["tool_name"]
            args = request.get("arguments", {})
            if not isinstance(args, dict):
                raise errors.MalformedRequest("arguments must be an object")
            agent = request.get("agent") or self.engine.config.agents[0]
            if agent not in self.sessions:
                raise errors.MalformedRequest(f"unknown agent {agent!r}")
            session = self.sessions[agent]
            if tool not in ALL_TOOLS or tool not in MODE_TOOLS[self.mode]:
                raise errors.UnknownTool(tool)
            if tool not in PHASE_TOOLS[(self.mode, session.day_phase)]:
                raise errors.PhaseViolation(
                    f"{tool} not permitted during the memory phase"
                )
            if session.closed or session.budget.actions_remaining <= 0:
                session.closed = True
                # next_day stays allowed so an exhausted session can still end
                # its day and resume tomorrow from files
                if tool != NEXT_DAY:
                    raise errors.BudgetExhausted("session budget exhausted")
            if agent in self._waiting_for_advance and tool != NEXT_DAY:
                raise errors.PhaseViolation("agent already ended its day")
            payload = self._dispatch(session, tool, args)
            advisory = charge(
                session.budget,
                action_cost=1,
                token_cost=count_tokens(args) + count_tokens(payload),
            )
            if advisory.session_end:
                session.closed = True
            envelope = {
                "id": req_id,
                "ok": True,
                "payload": payload,
                "budget": {
                    "actions_remaining": session.budget.actions_remaining,
                    "context_tokens_remaining": session.budget.context_tokens_remaining,
                    "force_submit": advisory.force_submit,
                    "session_end": advisory.session_end,
                },
            }
            return envelope
        except errors.SimError as exc:
            return {
                "id": req_id,
                "ok": False,
                "error": {"code": exc.code, "message": str(exc)},
            }

    def _dispatch(self, session: Session, tool: str, args: dict) -> dict:
        if tool == SEARCH:
            return self._search(args)
        if tool == SUBMIT:
            return self._submit(session, args)
        if tool == NEXT_DAY:
            return self._next_day(session)
        return self._memory_op(session, tool, args)

    # --- tools -----------------------------------------------------------

    def _search(self, args: dict) -> dict:
        query = args.get("query")
        if not isinstance(query, str):
            raise errors.MalformedRequest("query must be a string")
        from_date = _parse_date(args.get("from_date"))
        to_date = _parse_date(args.get("to_date"))
        k = int(args.get("k", 5))
        hits = self.engine.corpus.search(
            query, self.engine.gate, from_date=from_date, to_date=to_date, k=k
        )
        return {
            "results": [
                {
                    "text": h.chunk.text,
                    "article_id": h.article.article_id,
                    "chunk_index": h.chunk.chunk_index,
                    "title": h.article.title,
                    "source": h.article.source,
                    "url": h.article.url,
                    "published_date": h.article.published_date.isoformat(),
                    "score": round(h.score, 6),
                }
                for h in hits
            ]
        }

    def _submit(self, session: Session, args: dict) -> dict:
        if "forecasts" in args:
            raise errors.MalformedRequest(
                "each call must contain exactly one forecast for exactly one question ID"
            )
        qid = args.get("question_id")
        outcomes = args.get("outcomes")
        if not isinstance(qid, str) or not isinstance(outcomes, dict):
            raise errors.MalformedRequest("expected question_id and an outcomes object")
        forecast = self.engine.submit_forecast(session.agent_id, qid, outcomes)
        record = {
            "qid": qid,
            "date": self.engine.today.isoformat(),
            "outcomes": forecast.as_dict(),
        }
        self.submissions_today[session.agent_id].append(record)
        return {"accepted": True, "forecast": forecast.as_dict()}

    def _next_day(self, session: Session) -> dict:
        outcome = session.gate.request_advance()
        if outcome == "memory-phase":
            return {
                "phase": "memory",
                "note": "memory-update mode: persist notes, then call next_day again",
            }
        if self.mode == "custom-harness":
            root = self.workspace_roots.get(session.agent_id)
            if root is not None:
                self.memory_stores[session.agent_id].persist(root, self.engine.today)
        self._waiting_for_advance.add(session.agent_id)
        if self._waiting_for_advance >= set(self.engine.config.agents):
            feedback = self._advance_day()
            return {"advanced": True, "feedback": feedback[session.agent_id]}
        return {"advanced": False, "waiting": True}

    def _advance_day(self) -> dict[str, dict]:
        if self.engine.config.multi_agent:
            from .multiagent import publish_aggregates

            publish_aggregates(self.engine)
        raw = self.engine.next_day()
        feedback = {agent: _feedback_payload(fb) for agent, fb in raw.items()}
        self._waiting_for_advance.clear()
        for agent, session in self.sessions.items():
            session.budget = self.budget_config.fresh()
            session.closed = False
            session.gate.in_memory_phase = False
        if self.on_day_advanced is not None:
            self.on_day_advanced(feedback)
        for agent in self.submissions_today:
            self.submissions_today[agent] = []
        return feedback

    def _memory_op(self, session: Session, tool: str, args: dict) -> dict:
        store = self.memory_stores[session.agent_id]
        today = self.engine.today
        if tool == MEM_ADD:
            store.mem_add(
                qid=_require(args, "qid"),
                question=args.get("question", ""),
                memory=_require(args, "memory"),
                category=args.get("category", ""),
                today=today,
            )
            return {"ok": True}
        if tool == MEM_UPDATE:
            store.mem_update(_require(args, "qid"), _require(args, "memory"), today)
            return {"ok": True}
        if tool == MEM_DELETE:
            store.mem_delete(_require(args, "qid"))
            return {"ok": True}
        if tool == META_NEW:
            index = store.meta_new(_require(args, "text"), today)
            return {"index": index}
        if tool == META_UPDATE:
            store.meta_update(int(_require(args, "index")), _require(args, "text"), today)
            return {"ok": True}
        if tool == META_DELETE:
            store.meta_delete(int(_require(args, "index")))
            return {"ok": True}
        if tool == META_RETRIEVE:
            indices = args.get("indices")
            if not isinstance(indices, list):
                raise errors.MalformedRequest("indices must be a list")
            return {"texts": store.meta_retrieve([int(i) for i in indices])}
        raise errors.UnknownTool(tool)

    # --- transports ------------------------------------------------------

    def serve_stdio(self, stdin: BinaryIO, stdout: BinaryIO) -> None:
        while True:
            request = read_frame(stdin)
            if request is None:
                return
            stdout.write(encode_frame(self.handle(request)))
            stdout.flush()

    def serve_socket(self, path: Path) -> "SocketServerHandle":
        """Serve over a UNIX socket; each connection may carry any agent's
        requests (the request names its agent)."""
        path = Path(path)
        if path.exists():
            path.unlink()
        sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        sock.bind(str(path))
        sock.listen(8)
        handle = SocketServerHandle(sock, path)

        def accept_loop():
            while not handle.stopped:
                try:
                    conn, _ = sock.accept()
                except OSError:
                    return
                threading.Thread(
                    target=self._serve_connection, args=(conn,), daemon=True
                ).start()

        handle.thread = threading.Thread(target=accept_loop, daemon=True)
        handle.thread.start()
        return handle

    def _serve_connection(self, conn: socket.socket) -> None:
        with conn:
            while True:
                request = _read_frame_socket(conn)
                if request is None:
                    return
                conn.sendall(encode_frame(self.handle(request)))


@dataclass
class SocketServerHandle:
    sock: socket.socket
    path: Path
    thread: Optional[threading.Thread] = None
    stopped: bool = False

    def stop(self) -> None:
        self.stopped = True
        try:
            self.sock.close()
        finally:
            if self.path.exists():
                self.path.unlink()


def _parse_date(value) -> Optional[date]:
    if value is None or value == "":
        return None
    try:
        return date.fromisoformat(str(value))
    except ValueError as exc:
        raise errors.MalformedRequest(f"bad date {value!r}") from exc


def _require(args: dict, key: str):
    if key not in args:
        raise errors.MalformedRequest(f"missing argument {key!r}")
    return args[key]


def _feedback_payload(fb) -> dict:
    return {
        "date": fb.day.isoformat(),
        "resolved": [
            {
                "qid": e.qid,
                "title": e.title,
                "distribution": e.distribution,
                "ground_truth": e.ground_truth,
                "bss": round(e.bss, 9),
                "tw_contribution": round(e.tw_contribution, 9),
            }
            for e in fb.resolved
        ],
        "cumulative": {
            "num_predictions": fb.num_predictions,
            "num_resolved": fb.num_resolved,
            "accuracy": round(fb.accuracy, 9),
            "mean_bss": round(fb.mean_bss, 9),
        },
        "new_article_count": fb.new_article_count,
        "active_count": fb.active_count,
        "terminated": fb.terminated,
    }
