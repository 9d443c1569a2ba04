"""Newline-delimited message protocol for out-of-process agents.

The engine speaks one JSON object per line over standard streams or a TCP
socket.  Engine-to-agent kinds: ``upload_batch`` (item descriptors, batch
index, is_last flag; the last batch is the end-of-upload signal),
``turn_request`` (budget remaining), ``verdict`` (informational), and
``episode_end``.  The agent replies to every ``upload_batch`` and
``turn_request`` with exactly one ``agent_action`` line: ``ack``,
``ask_value``, ``ask_text``, or ``guess``.

Anything malformed - oversized lines, broken JSON, wrong kinds, missing
fields, closed streams, or a per-turn timeout - raises AgentProtocolError,
which the episode runner converts into an aborted but scoreable transcript.
The engine never crashes or hangs on agent misbehavior.
"""

from __future__ import annotations

import json
import selectors
import socket
import subprocess
from dataclasses import dataclass
from typing import Sequence

from .agents import (
    AgentAction,
    AgentObservation,
    AskText,
    AskValue,
    EpisodeAgent,
    Guess,
    ItemDescriptor,
    SignalEndAck,
)
from .harness import AgentProtocolError

#: Hard cap on a single protocol line; anything longer is a protocol error.
MAX_LINE_BYTES = 1_048_576

DEFAULT_TURN_TIMEOUT = 120.0


def encode_message(message: dict) -> bytes:
    return (json.dumps(message, separators=(",", ":")) + "\n").encode("utf-8")


def decode_action(line: bytes) -> AgentAction:
    """Parse one agent reply line into an action."""
    if len(line) > MAX_LINE_BYTES:
        raise AgentProtocolError(f"agent line exceeds {MAX_LINE_BYTES} bytes")
    try:
        message = json.loads(line.decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise AgentProtocolError(f"agent sent non-JSON line: {exc}") from exc
    if not isinstance(message, dict):
        raise AgentProtocolError("agent message must be a JSON object")
    if message.get("kind") != "agent_action":
        raise AgentProtocolError(f"unexpected message kind {message.get('kind')!r}")
    action = message.get("action")
    if action == "ack":
        return SignalEndAck()
    if action == "ask_value":
        value_id = message.get("value_id")
        if not isinstance(value_id, str) or not value_id:
            raise AgentProtocolError("ask_value needs a non-empty 'value_id'")
        return AskValue(value_id)
    if action == "ask_text":
        text = message.get("text")
        if not isinstance(text, str):
            raise AgentProtocolError("ask_text needs a string 'text'")
        return AskText(text)
    if action == "guess":
        index = message.get("index")
        if not isinstance(index, int) or isinstance(index, bool) or index < 1:
            raise AgentProtocolError("guess needs a positive integer 'index'")
        return Guess(index=index)
    raise AgentProtocolError(f"unknown agent action {action!r}")


class LineChannel:
    """One line in, one line out, with a timeout. Implementations wrap a
    socket or a subprocess pipe pair."""

    def send_line(self, payload: bytes) -> None:
        raise NotImplementedError

    def recv_line(self, timeout: float | None) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass


class SocketChannel(LineChannel):
    def __init__(self, sock: socket.socket) -> None:
        self._sock = sock
        self._buffer = b""

    def send_line(self, payload: bytes) -> None:
        try:
            self._sock.sendall(payload)
        except OSError as exc:
            raise AgentProtocolError(f"socket send failed: {exc}") from exc

    def recv_line(self, timeout: float | None) -> bytes:
        self._sock.settimeout(timeout)
        while b"\n" not in self._buffer:
            if len(self._buffer) > MAX_LINE_BYTES:
                raise AgentProtocolError("agent line exceeds the size limit")
            try:
                chunk = self._sock.recv(65536)
            except socket.timeout as exc:
                raise AgentProtocolError("per-turn timeout expired") from exc
            except OSError as exc:
                raise AgentProtocolError(f"socket recv failed: {exc}") from exc
            if not chunk:
                raise AgentProtocolError("agent closed the connection")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class ProcessChannel(LineChannel):
    """Talk to a spawned agent process over its stdin/stdout."""

    def __init__(self, process: subprocess.Popen) -> None:
        if process.stdin is None or process.stdout is None:
            raise ValueError("agent process must be spawned with piped stdin/stdout")
        self._process = process
        self._buffer = b""
        self._selector = selectors.DefaultSelector()
        self._selector.register(process.stdout, selectors.EVENT_READ)

    def send_line(self, payload: bytes) -> None:
        try:
            self._process.stdin.write(payload)
            self._process.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise AgentProtocolError(f"agent stdin closed: {exc}") from exc

    def recv_line(self, timeout: float | None) -> bytes:
        while b"\n" not in self._buffer:
            if len(self._buffer) > MAX_LINE_BYTES:
                raise AgentProtocolError("agent line exceeds the size limit")
            if not self._selector.select(timeout):
                raise AgentProtocolError("per-turn timeout expired")
            chunk = self._process.stdout.read1(65536)
            if not chunk:
                raise AgentProtocolError("agent process closed stdout")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def close(self) -> None:
        self._selector.close()
        if self._process.poll() is None:
            self._process.terminate()
            try:
                self._process.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._process.kill()


@dataclass
class WireAgent(EpisodeAgent):
    """Adapter that drives a remote agent through the line protocol.

    Keeps the exchange in lockstep: every upload batch and every turn
    request expects exactly one action line back.
    """

    channel: LineChannel
    timeout: float | None = DEFAULT_TURN_TIMEOUT
    name: str = "external"

    def upload_batch(
        self, items: Sequence[ItemDescriptor], batch_index: int, is_last: bool
    ) -> AgentAction:
        self.channel.send_line(
            encode_message(
                {
                    "kind": "upload_batch",
                    "batch_index": batch_index,
                    "is_last": is_last,
                    "items": [
                        {"item_id": d.item_id, "position": d.position, "media": d.media}
                        for d in items
                    ],
                }
            )
        )
        return decode_action(self.channel.recv_line(self.timeout))

    def act(self, obs: AgentObservation) -> AgentAction:
        self.channel.send_line(
            encode_message(
                {"kind": "turn_request", "budget_remaining": obs.budget_remaining}
            )
        )
        return decode_action(self.channel.recv_line(self.timeout))

    def notify_verdict(self, turn_index: int, verdict_kind: str, violation: str | None) -> None:
        self.channel.send_line(
            encode_message(
                {
                    "kind": "verdict",
                    "turn_index": turn_index,
                    "verdict": verdict_kind,
                    "violation": violation,
                }
            )
        )

    def episode_end(self, outcome: str) -> None:
        try:
            self.channel.send_line(
                encode_message({"kind": "episode_end", "outcome": outcome})
            )
        except AgentProtocolError:
            pass
        self.channel.close()


def listen_channel(host: str, port: int) -> socket.socket:
    """Bind a listener the engine accepts one agent connection per episode on."""
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind((host, port))
    listener.listen()
    return listener


def accept_agent(listener: socket.socket, timeout: float | None) -> WireAgent:
    listener.settimeout(timeout)
    try:
        conn, _addr = listener.accept()
    except socket.timeout as exc:
        raise AgentProtocolError("no agent connected before the timeout") from exc
    return WireAgent(channel=SocketChannel(conn), timeout=timeout)


def spawn_agent(command: Sequence[str], timeout: float | None) -> WireAgent:
    process = subprocess.Popen(
        list(command),
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.DEVNULL,
    )
    return WireAgent(channel=ProcessChannel(process), timeout=timeout)
