"""TTL marker emission over loopback and virtual serial ports."""
import os
import pty
import time

import pytest

from pitchtrace.logs import EventKind
from pitchtrace.ttl import DEFAULT_BAUD, TTL_CODES, TtlSender


EXPECTED_CODES = {
    "SessionStart": 0x01,
    "GoCue": 0x02,
    "TargetOnset": 0x03,
    "TrialComplete": 0x04,
    "PlaybackStart": 0x05,
    "SessionStop": 0x0F,
}


def test_code_map_frozen():
    assert TtlSender.code_map() == EXPECTED_CODES


class TestLoopback:
    def test_marker_bytes_in_order(self):
        sender = TtlSender()
        assert sender.connect("loop://")
        kinds = [
            EventKind.SESSION_START,
            EventKind.GO_CUE,
            EventKind.TARGET_ONSET,
            EventKind.TRIAL_COMPLETE,
            EventKind.SESSION_STOP,
        ]
        markers = [sender.send(kind, float(i)) for i, kind in enumerate(kinds)]
        assert all(m is not None for m in markers)
        wire = sender.read_loopback(len(kinds))
        assert list(wire) == [TTL_CODES[k] for k in kinds]
        sender.disconnect()

    def test_disconnected_send_is_skipped(self):
        sender = TtlSender()
        assert not sender.connected
        assert sender.send(EventKind.GO_CUE, 0.0) is None

    def test_unmapped_kind_rejected(self):
        sender = TtlSender()
        sender.connect("loop://")
        with pytest.raises(ValueError):
            sender.send(EventKind.AUDIO_GAP, 0.0)
        sender.disconnect()

    def test_enqueue_is_fast(self):
        sender = TtlSender()
        sender.connect("loop://")
        times = []
        for i in range(200):
            t0 = time.perf_counter()
            sender.send(EventKind.GO_CUE, float(i))
            times.append(time.perf_counter() - t0)
        sender.join()
        assert max(times) < 0.002
        sender.disconnect()


class TestVirtualSerialPort:
    def test_pty_round_trip_in_order(self):
        controller, follower = pty.openpty()
        try:
            sender = TtlSender()
            assert sender.connect(os.ttyname(follower), DEFAULT_BAUD)
            for kind in (EventKind.GO_CUE, EventKind.TARGET_ONSET,
                         EventKind.TRIAL_COMPLETE):
                assert sender.send(kind, 0.0) is not None
            sender.join()
            wire = os.read(controller, 3)
            assert list(wire) == [0x02, 0x03, 0x04]
            sender.disconnect()
        finally:
            os.close(controller)
            os.close(follower)

    def test_missing_port_fails_softly(self):
        sender = TtlSender()
        assert sender.connect("/dev/does-not-exist") is False
        assert not sender.connected
        assert sender.send(EventKind.GO_CUE, 0.0) is None

    def test_unsupported_baud_fails_softly(self):
        controller, follower = pty.openpty()
        try:
            sender = TtlSender()
            assert sender.connect(os.ttyname(follower), baud=1234) is False
        finally:
            os.close(controller)
            os.close(follower)

    def test_reconnect_replaces_port(self):
        sender = TtlSender()
        assert sender.connect("loop://")
        assert sender.connect("loop://")
        assert sender.send(EventKind.GO_CUE, 0.0) is not None
        assert sender.read_loopback(1) == bytes([0x02])
        sender.disconnect()
