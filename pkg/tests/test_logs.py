"""Session folder layout and the three log file formats."""
import json

import pytest

from pitchtrace.logs import (
    PITCH_CSV_HEADER,
    EventKind,
    EventRecord,
    SessionLog,
    format_ms,
    open_session_folder,
    sanitize_subject_id,
)

from conftest import unvoiced_frame, voiced_frame


class TestSessionFolder:
    def test_simple_subject(self, tmp_path):
        folder = open_session_folder(tmp_path, "S01", "2026-01-02T03:04:05")
        assert folder.is_dir()
        assert folder.parent.name == "S01"
        assert list(folder.iterdir()) == []

    def test_separator_sanitized(self, tmp_path):
        folder = open_session_folder(tmp_path, "a/b", "stamp")
        assert folder.parent.name == "a_b"

    def test_empty_subject_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            open_session_folder(tmp_path, "", "stamp")
        with pytest.raises(ValueError):
            sanitize_subject_id("   ")

    def test_collision_gets_suffix(self, tmp_path):
        first = open_session_folder(tmp_path, "S01", "stamp")
        second = open_session_folder(tmp_path, "S01", "stamp")
        assert first != second
        assert second.name.startswith("stamp")


class TestPitchCsv:
    def test_rows_and_header(self, tmp_path):
        log = SessionLog(tmp_path)
        log.append_pitch(voiced_frame(1500.0, 200.0, rms=0.21))
        log.append_pitch(unvoiced_frame(1550.0, rms=0.002))
        log.close()
        lines = (tmp_path / "pitch.csv").read_text().splitlines()
        assert lines[0] == PITCH_CSV_HEADER
        assert lines[1] == "1500,200.000,1,0.050,0.210"
        assert lines[2] == "1550,,0,,0.002"
        assert len(lines) == 3

    def test_fractional_times_keep_three_decimals(self):
        assert format_ms(1500.0) == "1500"
        assert format_ms(24.988662131519274) == "24.989"


class TestEventJsonl:
    def test_one_object_per_line(self, tmp_path):
        log = SessionLog(tmp_path)
        log.append_event(EventRecord(0.0, EventKind.SESSION_START, {"a": 1}))
        log.append_event(
            EventRecord(
                3000.0,
                EventKind.TRIAL_COMPLETE,
                {"task_id": "step", "score": 0.85, "category": "smiley"},
            )
        )
        log.close()
        lines = (tmp_path / "events.jsonl").read_text().splitlines()
        docs = [json.loads(line) for line in lines]
        assert docs[0]["kind"] == "SessionStart"
        assert docs[1]["payload"]["task_id"] == "step"
        assert docs[1]["payload"]["score"] == 0.85

    def test_integral_times_serialize_compactly(self):
        rec = EventRecord(1500.0, EventKind.GO_CUE, {})
        assert '"time_ms":1500,' in rec.to_json()

    def test_all_event_kinds_have_distinct_names(self):
        names = [k.value for k in EventKind]
        assert len(names) == len(set(names)) == 15
