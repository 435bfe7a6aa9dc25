"""Socket client for the simulation tool server.

The wire format is length-prefixed JSON: a 4-byte big-endian unsigned length
followed by a UTF-8 JSON object. The client owns request-id assignment and
turns server-side error envelopes into ProtocolError exceptions carrying the
server's error code, so callers never parse envelopes by hand.
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

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


class ProtocolError(Exception):
    """Server rejected a request; `code` is the server's named error code."""

    def __init__(self, code: str, message: str):
        super().__init__(f"[{code}] {message}")
        self.code = code


class TransportError(Exception):
    """The connection dropped mid-exchange."""


def encode_request(request: dict) -> bytes:
    body = json.dumps(request, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack(">I", len(body)) + body


@dataclass
class BudgetStatus:
    actions_remaining: int
    context_tokens_remaining: int
    force_submit: bool
    session_end: bool


class ClientSession:
    """One agent's connection to a running simulation.

    Requests are serialized per session and matched to responses by id.
    Typed wrappers return the payload dict directly; the last budget envelope
    is kept on `last_budget` for agents that pace themselves.
    """

    def __init__(self, sock: socket.socket, agent_id: Optional[str] = None):
        self._sock = sock
        self.agent_id = agent_id
        self._next_id = 0
        self.last_budget: Optional[BudgetStatus] = None

    @classmethod
    def connect(cls, endpoint: Path, agent_id: Optional[str] = None) -> "ClientSession":
        sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        sock.connect(str(endpoint))
        return cls(sock, agent_id=agent_id)

    def close(self) -> None:
        self._sock.close()

    def __enter__(self) -> "ClientSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # --- core round trip --------------------------------------------------

    def build_request(self, tool_name: str, arguments: dict) -> dict:
        self._next_id += 1
        request = {"id": self._next_id, "tool_name": tool_name, "arguments": arguments}
        if self.agent_id is not None:
            request["agent"] = self.agent_id
        return request

    def call(self, tool_name: str, arguments: Optional[dict] = None) -> dict:
        request = self.build_request(tool_name, arguments or {})
        self._sock.sendall(encode_request(request))
        response = self._read_response()
        if response.get("id") != request["id"]:
            raise TransportError(
                f"response id {response.get('id')!r} does not match request {request['id']}"
            )
        if not response.get("ok"):
            error = response.get("error", {})
            raise ProtocolError(error.get("code", "Unknown"), error.get("message", ""))
        budget = response.get("budget")
        if budget:
            self.last_budget = BudgetStatus(
                actions_remaining=budget["actions_remaining"],
                context_tokens_remaining=budget["context_tokens_remaining"],
                force_submit=budget["force_submit"],
                session_end=budget["session_end"],
            )
        return response["payload"]

    def _read_response(self) -> dict:
        header = self._recv_exact(4)
        (length,) = struct.unpack(">I", header)
        return json.loads(self._recv_exact(length).decode("utf-8"))

    def _recv_exact(self, n: int) -> bytes:
        data = b""
        while len(data) < n:
            part = self._sock.recv(n - len(data))
            if not part:
                raise TransportError("connection closed by server")
            data += part
        return data

    # --- tool wrappers ----------------------------------------------------

    def search_news(
        self,
        query: str,
        from_date: Optional[str] = None,
        to_date: Optional[str] = None,
        k: int = 5,
    ) -> list[dict]:
        arguments: dict = {"query": query, "k": k}
        if from_date is not None:
            arguments["from_date"] = from_date
        if to_date is not None:
            arguments["to_date"] = to_date
        return self.call(SEARCH, arguments)["results"]

    def submit_forecast(self, question_id: str, outcomes: dict[str, float]) -> dict:
        return self.call(SUBMIT, {"question_id": question_id, "outcomes": outcomes})

    def next_day(self) -> dict:
        """End this agent's day. The payload is either a memory-phase notice
        (custom harness, first call), a waiting marker (multi-agent barrier),
        or the advanced-day feedback."""
        return self.call(NEXT_DAY)

    def end_day(self) -> dict:
        """next_day, transparently handling the two-call memory-phase gate."""
        payload = self.next_day()
        if payload.get("phase") == "memory":
            payload = self.next_day()
        return payload

    def mem_add(self, qid: str, memory: str, question: str = "", category: str = "") -> dict:
        return self.call(
            MEM_ADD,
            {"qid": qid, "question": question, "memory": memory, "category": category},
        )

    def mem_update(self, qid: str, memory: str) -> dict:
        return self.call(MEM_UPDATE, {"qid": qid, "memory": memory})

    def mem_delete(self, qid: str) -> dict:
        return self.call(MEM_DELETE, {"qid": qid})

    def memory_new(self, text: str) -> int:
        return self.call(META_NEW, {"text": text})["index"]

    def memory_update(self, index: int, text: str) -> dict:
        return self.call(META_UPDATE, {"index": index, "text": text})

    def memory_delete(self, index: int) -> dict:
        return self.call(META_DELETE, {"index": index})

    def memory_retrieve(self, indices: list[int]) -> list[str]:
        return self.call(META_RETRIEVE, {"indices": indices})["texts"]
