"""Synchronous pump from a capture source into a session.

The runner is the session's single owner thread: it interleaves control
commands (submitted from other threads, e.g. the WebSocket server) with
capture blocks, so every mutation happens in one ordered stream.
"""
from __future__ import annotations

import queue
import threading
from concurrent.futures import Future
from typing import Any, Callable

from .session import Session, SessionError

__all__ = ["SessionRunner"]


class SessionRunner:
    def __init__(self, session: Session, source, stop_when_done: bool = True):
        self.session = session
        self.source = source
        self.stop_when_done = stop_when_done
        self.summary: dict[str, Any] | None = None
        self._commands: queue.Queue[tuple[Callable[[], Any], Future]] = queue.Queue()
        self._stop_requested = threading.Event()
        self._thread: threading.Thread | None = None

    def submit(self, fn: Callable[[], Any]) -> Future:
        """Run fn on the session thread between blocks; returns a Future."""
        fut: Future = Future()
        self._commands.put((fn, fut))
        return fut

    def request_stop(self) -> None:
        self._stop_requested.set()
        if hasattr(self.source, "stop"):
            self.source.stop()

    def _drain_commands(self) -> None:
        while True:
            try:
                fn, fut = self._commands.get_nowait()
            except queue.Empty:
                return
            try:
                fut.set_result(fn())
            except Exception as exc:
                fut.set_exception(exc)

    def run(self) -> dict[str, Any]:
        """Pump blocks until the source ends, the experiment finishes, or stop."""
        if not self.session.active:
            self.session.start()
        try:
            for block in self.source.blocks():
                self._drain_commands()
                if self._stop_requested.is_set():
                    break
                self.session.handle_block(block)
                if self.stop_when_done and self.session.experiment_done:
                    break
        finally:
            self._drain_commands()
            if self.session.active:
                self.summary = self.session.request_stop()
        return self.summary

    # threaded operation for server mode ------------------------------

    def start_thread(self) -> None:
        if self._thread is not None:
            raise SessionError("runner thread already started")
        self._thread = threading.Thread(target=self.run, daemon=True)
        self._thread.start()

    def join(self, timeout: float | None = None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)

    @property
    def running(self) -> bool:
        return self._thread is not None and self._thread.is_alive()
