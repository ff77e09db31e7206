"""WebSocket control and telemetry endpoint for operator and subject UIs.

Message framing (protocol v1, see docs/protocol.md): every frame is a
single JSON object with "type", "v", and a per-direction monotone "seq".
Clients declare a role on hello; only proctor-role clients may send
commands, and every command gets exactly one ack or error carrying the
command's seq in "in_reply_to".

Telemetry fan-out is lossy per client (bounded buffer, oldest dropped,
drop count reported) but command replies are never dropped. Commands are
executed on the session thread via the runner's command queue, so client
load can never tear session state.
"""
from __future__ import annotations

import asyncio
import json
from collections import deque
from typing import Any, Callable

from websockets.asyncio.server import serve as ws_serve

from .runner import SessionRunner
from .session import (
    Session,
    SessionConfig,
    SessionError,
    TelemetryHub,
    entry_from_dict,
)

__all__ = ["EngineService", "ControlServer", "PROTOCOL_VERSION", "SUBJECT_TYPES"]

PROTOCOL_VERSION = 1

# everything the Subject Window needs, and nothing else (no raw config)
SUBJECT_TYPES = frozenset(
    {"pitch", "phase", "countdown", "contour", "arrow", "trial_result", "playback"}
)

COMMANDS = frozenset(
    {
        "start_session",
        "stop_session",
        "update_config",
        "queue_edit",
        "connect_ttl",
        "set_guidance",
        "trigger_playback_replay",
        "get_snapshot",
    }
)


class EngineService:
    """Session lifecycle owner bridging the asyncio loop and the runner thread."""

    def __init__(
        self,
        base_config: SessionConfig,
        base_tasks: list[dict[str, Any]],
        source_factory: Callable[[SessionConfig], Any],
        clock_anchor: str | None = None,
    ):
        self.base_config = base_config
        self.base_tasks = base_tasks
        self.source_factory = source_factory
        self.clock_anchor = clock_anchor
        self.hub = TelemetryHub()
        self.session: Session | None = None
        self.runner: SessionRunner | None = None

    @property
    def session_active(self) -> bool:
        return self.session is not None and self.session.active

    def snapshot(self) -> dict[str, Any]:
        if self.session is not None:
            return self.session.snapshot()
        return {"active": False, "config": self.base_config.to_dict()}

    async def execute(self, kind: str, payload: dict[str, Any]) -> dict[str, Any]:
        if kind == "start_session":
            return self._start_session(payload)
        if kind == "get_snapshot":
            if self.session_active:
                return await self._on_session_thread(self.session.snapshot)
            return self.snapshot()
        if kind == "stop_session":
            return await self._stop_session()

        if not self.session_active:
            raise SessionError("not-active")
        session = self.session
        if kind == "update_config":
            return await self._on_session_thread(
                lambda: session.apply_update(payload)
            )
        if kind == "queue_edit":
            return await self._on_session_thread(lambda: session.queue_edit(payload))
        if kind == "set_guidance":
            mode = payload.get("mode")
            return await self._on_session_thread(
                lambda: session.apply_update({"guidance_mode": mode})
            )
        if kind == "connect_ttl":
            port = payload.get("port")
            baud = int(payload.get("baud", 115200))
            return await self._on_session_thread(
                lambda: {"connected": session.connect_ttl(port, baud)}
            )
        if kind == "trigger_playback_replay":
            return await self._on_session_thread(
                lambda: session.trigger_playback_replay() or {"replayed": True}
            )
        raise SessionError(f"unknown command {kind}")

    async def _on_session_thread(self, fn: Callable[[], Any]) -> Any:
        if self.runner is not None and self.runner.running:
            return await asyncio.wrap_future(self.runner.submit(fn))
        return fn()

    def _start_session(self, payload: dict[str, Any]) -> dict[str, Any]:
        if self.session_active:
            raise SessionError("already-active")
        cfg_doc = self.base_config.to_dict()
        cfg_doc.update(payload.get("config", {}))
        cfg = SessionConfig.from_dict(cfg_doc)
        task_docs = payload.get("tasks", self.base_tasks)
        entries = [entry_from_dict(doc, cfg.cents_default) for doc in task_docs]
        session = Session(
            cfg, entries, hub=self.hub, clock_anchor=self.clock_anchor
        )
        source = self.source_factory(cfg)
        runner = SessionRunner(session, source, stop_when_done=False)
        session.start()
        runner.start_thread()
        self.session = session
        self.runner = runner
        return session.snapshot()

    async def _stop_session(self) -> dict[str, Any]:
        if not self.session_active:
            raise SessionError("not-active")
        runner = self.runner
        runner.request_stop()
        await asyncio.get_running_loop().run_in_executor(None, runner.join, 10.0)
        summary = runner.summary or {}
        self.session = None
        self.runner = None
        return {"summary": summary}

    async def shutdown(self) -> None:
        if self.session_active:
            await self._stop_session()


class _Client:
    def __init__(self, role: str, max_buffer: int = 256):
        self.role = role
        self.replies: deque[dict[str, Any]] = deque()
        self.telemetry: deque[dict[str, Any]] = deque(maxlen=max_buffer)
        self.dropped = 0
        self.wake = asyncio.Event()
        self.seq = 0

    def queue_reply(self, msg: dict[str, Any]) -> None:
        self.replies.append(msg)
        self.wake.set()

    def queue_telemetry(self, msg: dict[str, Any]) -> None:
        if self.role == "subject" and msg.get("type") not in SUBJECT_TYPES:
            return
        if len(self.telemetry) == self.telemetry.maxlen:
            self.dropped += 1
        self.telemetry.append(msg)
        self.wake.set()


class ControlServer:
    def __init__(self, service: EngineService, host: str = "127.0.0.1",
                 port: int = 8765):
        self.service = service
        self.host = host
        self.port = port
        self._clients: set[_Client] = set()
        self._server = None
        self._loop: asyncio.AbstractEventLoop | None = None

    async def start(self) -> int:
        """Bind and start serving; returns the bound port."""
        self._loop = asyncio.get_running_loop()
        self.service.hub.subscribe(self._on_telemetry)
        self._server = await ws_serve(self._handler, self.host, self.port)
        return self._server.sockets[0].getsockname()[1]

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        self.service.hub.unsubscribe(self._on_telemetry)
        await self.service.shutdown()

    async def serve_forever(self) -> None:
        await self.start()
        await asyncio.Future()

    # telemetry bridge (called from the session thread) ----------------

    def _on_telemetry(self, msg: dict[str, Any]) -> None:
        loop = self._loop
        if loop is None or loop.is_closed():
            return
        loop.call_soon_threadsafe(self._fanout, msg)

    def _fanout(self, msg: dict[str, Any]) -> None:
        for client in self._clients:
            client.queue_telemetry(msg)

    # per-connection ---------------------------------------------------

    async def _handler(self, websocket) -> None:
        client = await self._handshake(websocket)
        if client is None:
            return
        self._clients.add(client)
        writer = asyncio.create_task(self._writer(websocket, client))
        try:
            async for raw in websocket:
                await self._on_message(client, raw)
        except Exception:
            pass
        finally:
            self._clients.discard(client)
            writer.cancel()

    async def _handshake(self, websocket) -> _Client | None:
        async for raw in websocket:
            try:
                msg = json.loads(raw)
            except (json.JSONDecodeError, UnicodeDecodeError):
                await self._send_direct(
                    websocket, self._error(None, "malformed JSON")
                )
                continue
            if msg.get("type") != "hello":
                await self._send_direct(
                    websocket,
                    self._error(msg.get("seq"), "expected hello with a role"),
                )
                continue
            role = msg.get("role")
            if role not in ("proctor", "subject"):
                await self._send_direct(
                    websocket,
                    self._error(msg.get("seq"), f"unknown role {role!r}"),
                )
                continue
            client = _Client(role)
            client.queue_reply(
                {
                    "type": "welcome",
                    "in_reply_to": msg.get("seq"),
                    "payload": {"role": role, "snapshot": self.service.snapshot()},
                }
            )
            return client
        return None

    async def _on_message(self, client: _Client, raw) -> None:
        try:
            msg = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError):
            client.queue_reply(self._error(None, "malformed JSON"))
            return
        seq = msg.get("seq")
        kind = msg.get("type")
        if kind not in COMMANDS:
            client.queue_reply(self._error(seq, f"unknown message type {kind!r}"))
            return
        if client.role != "proctor":
            client.queue_reply(
                self._error(seq, "commands require the proctor role")
            )
            return
        try:
            result = await self.service.execute(kind, msg.get("payload") or {})
        except SessionError as exc:
            client.queue_reply(self._error(seq, str(exc)))
            return
        except Exception as exc:  # defensive: commands must never kill the link
            client.queue_reply(self._error(seq, f"internal error: {exc}"))
            return
        client.queue_reply({"type": "ack", "in_reply_to": seq, "payload": result})

    @staticmethod
    def _error(seq, message: str) -> dict[str, Any]:
        return {"type": "error", "in_reply_to": seq, "message": message}

    async def _send_direct(self, websocket, msg: dict[str, Any]) -> None:
        msg = dict(msg)
        msg.setdefault("v", PROTOCOL_VERSION)
        await websocket.send(json.dumps(msg))

    async def _writer(self, websocket, client: _Client) -> None:
        try:
            while True:
                await client.wake.wait()
                client.wake.clear()
                while client.replies or client.telemetry:
                    if client.replies:
                        msg = client.replies.popleft()
                    else:
                        msg = client.telemetry.popleft()
                        if client.dropped:
                            msg = dict(msg)
                            msg["dropped_before"] = client.dropped
                            client.dropped = 0
                    out = dict(msg)
                    out["v"] = PROTOCOL_VERSION
                    out["seq"] = client.seq
                    client.seq += 1
                    await websocket.send(json.dumps(out))
        except asyncio.CancelledError:
            raise
        except Exception:
            pass
