"""Hardware sync markers over a serial port (8N1, one byte per event).

The session thread only enqueues markers; a dedicated writer thread owns
the port so marker emission never blocks real-time processing. A missing
or failing port degrades to logged skips, never to a stopped session.

Port names: a filesystem path (tty device or pty slave) opens a real 8N1
serial line via termios; the name "loop://" opens an in-memory loopback
for tests and headless runs.
"""
from __future__ import annotations

import os
import queue
import threading
from dataclasses import dataclass

from .logs import EventKind

__all__ = ["TTL_CODES", "TtlMarker", "TtlSender", "DEFAULT_BAUD"]

DEFAULT_BAUD = 115200

TTL_CODES: dict[EventKind, int] = {
    EventKind.SESSION_START: 0x01,
    EventKind.GO_CUE: 0x02,
    EventKind.TARGET_ONSET: 0x03,
    EventKind.TRIAL_COMPLETE: 0x04,
    EventKind.PLAYBACK_START: 0x05,
    EventKind.SESSION_STOP: 0x0F,
}


@dataclass(frozen=True)
class TtlMarker:
    code: int
    kind: EventKind
    time_ms: float


class _LoopbackPort:
    """In-memory byte sink standing in for a wire."""

    def __init__(self):
        self._read_fd, self._write_fd = os.pipe()

    def write(self, data: bytes) -> None:
        os.write(self._write_fd, data)

    def read_sent(self, n: int) -> bytes:
        return os.read(self._read_fd, n)

    def close(self) -> None:
        for fd in (self._read_fd, self._write_fd):
            try:
                os.close(fd)
            except OSError:
                pass


class _SerialPort:
    """Minimal raw 8N1 serial port via termios; works on real ttys and ptys."""

    _BAUD_FLAGS = {9600: "B9600", 19200: "B19200", 38400: "B38400",
                   57600: "B57600", 115200: "B115200"}

    def __init__(self, port_name: str, baud: int):
        import termios

        if baud not in self._BAUD_FLAGS:
            raise ValueError(f"unsupported baud {baud}, pick from "
                             f"{sorted(self._BAUD_FLAGS)}")
        self._fd = os.open(port_name, os.O_RDWR | os.O_NOCTTY)
        try:
            attrs = termios.tcgetattr(self._fd)
            baud_flag = getattr(termios, self._BAUD_FLAGS[baud])
            # raw mode, 8 data bits, no parity, 1 stop bit
            attrs[0] = 0
            attrs[1] = 0
            attrs[2] = termios.CS8 | termios.CREAD | termios.CLOCAL
            attrs[3] = 0
            attrs[4] = baud_flag
            attrs[5] = baud_flag
            termios.tcsetattr(self._fd, termios.TCSANOW, attrs)
        except termios.error:
            # not a real tty (e.g. a fifo used in tests); raw bytes still flow
            pass

    def write(self, data: bytes) -> None:
        os.write(self._fd, data)

    def close(self) -> None:
        try:
            os.close(self._fd)
        except OSError:
            pass


class TtlSender:
    """Marker queue plus writer thread; enqueueing is the only hot-path cost."""

    def __init__(self, queue_size: int = 256):
        self._queue: queue.Queue[bytes | None] = queue.Queue(maxsize=queue_size)
        self._port = None
        self._thread: threading.Thread | None = None
        self.port_name: str | None = None
        self.baud: int | None = None
        self.write_errors = 0
        self.dropped = 0

    @property
    def connected(self) -> bool:
        return self._port is not None

    def connect(self, port_name: str, baud: int = DEFAULT_BAUD) -> bool:
        """Open the port; returns False (port stays disabled) if it cannot open."""
        self.disconnect()
        try:
            if port_name == "loop://":
                self._port = _LoopbackPort()
            else:
                self._port = _SerialPort(port_name, baud)
        except (OSError, ValueError):
            self._port = None
            return False
        self.port_name = port_name
        self.baud = baud
        self._thread = threading.Thread(target=self._drain, daemon=True)
        self._thread.start()
        return True

    def _drain(self) -> None:
        while True:
            item = self._queue.get()
            try:
                if item is None:
                    return
                port = self._port
                if port is None:
                    continue
                try:
                    port.write(item)
                except OSError:
                    self.write_errors += 1
            finally:
                self._queue.task_done()

    def send(self, kind: EventKind, time_ms: float) -> TtlMarker | None:
        """Enqueue one marker byte; returns None when disconnected or full."""
        code = TTL_CODES.get(kind)
        if code is None:
            raise ValueError(f"no TTL code mapped for event kind {kind}")
        if self._port is None:
            return None
        try:
            self._queue.put_nowait(bytes([code]))
        except queue.Full:
            self.dropped += 1
            return None
        return TtlMarker(code, kind, time_ms)

    def read_loopback(self, n: int) -> bytes:
        """Read bytes back from a loop:// port (test harness support)."""
        if not isinstance(self._port, _LoopbackPort):
            raise ValueError("loopback reads require a loop:// port")
        self.join()
        return self._port.read_sent(n)

    def join(self) -> None:
        """Block until every queued marker hit the wire."""
        self._queue.join()

    def disconnect(self) -> None:
        if self._thread is not None:
            self._queue.put(None)
            self._thread.join(timeout=2.0)
            self._thread = None
        if self._port is not None:
            self._port.close()
            self._port = None

    @staticmethod
    def code_map() -> dict[str, int]:
        """Kind-name to byte-code mapping, recorded in config.json per session."""
        return {kind.value: code for kind, code in TTL_CODES.items()}
