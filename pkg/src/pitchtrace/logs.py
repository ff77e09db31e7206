"""Per-session structured logs: pitch trace, event sequence, task records.

Layout under the log root:

    <subject_id>/<session-start>/
        pitch.csv      one row per detection hop
        events.jsonl   one JSON object per event
        tasks.jsonl    one JSON object per graded trial
        config.json    resolved session config snapshot (wall-clock anchor here)
        <subject>_<start>.wav

Pitch rows are CSV because the payload is dense and columnar; events and
tasks are JSONL because payloads are heterogeneous. All time_ms values are
sample-derived milliseconds since session start, so two runs over the same
input produce byte-identical log files.
"""
from __future__ import annotations

import json
import os
import re
import sys
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from .grading import TrialResult
from .pitch import PitchFrame

__all__ = [
    "EventKind",
    "EventRecord",
    "TaskRecord",
    "SessionLog",
    "open_session_folder",
    "sanitize_subject_id",
    "PITCH_CSV_HEADER",
]

PITCH_CSV_HEADER = "time_ms,f0_hz,voiced,aperiodicity,rms"

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]")


class EventKind(Enum):
    SESSION_START = "SessionStart"
    SESSION_STOP = "SessionStop"
    TASK_PROMPT = "TaskPrompt"
    COUNTDOWN = "Countdown"
    GO_CUE = "GoCue"
    BASELINE_START = "BaselineStart"
    BASELINE_RESULT = "BaselineResult"
    TARGET_ONSET = "TargetOnset"
    TRIAL_COMPLETE = "TrialComplete"
    TRIAL_ABORTED = "TrialAborted"
    PLAYBACK_START = "PlaybackStart"
    PLAYBACK_END = "PlaybackEnd"
    PARAM_UPDATE = "ParamUpdate"
    TTL_SENT = "TtlSent"
    AUDIO_GAP = "AudioGap"


@dataclass(frozen=True)
class EventRecord:
    time_ms: float
    kind: EventKind
    payload: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {"time_ms": _num(self.time_ms), "kind": self.kind.value,
               "payload": self.payload}
        return json.dumps(doc, separators=(",", ":"))


@dataclass(frozen=True)
class TaskRecord:
    """Everything needed to re-plot a graded trial point for point."""

    task_id: str
    pattern: str
    cents: float
    inverted: bool
    base_hz: float
    band_cents: float
    onset_ms: float
    times_ms: tuple[float, ...]
    target_hz: tuple[float, ...]
    upper_hz: tuple[float, ...]
    lower_hz: tuple[float, ...]
    change_times_ms: tuple[float, ...]
    score: float
    category: str

    @classmethod
    def from_result(cls, result: TrialResult, pattern: str, cents: float,
                    inverted: bool) -> "TaskRecord":
        c = result.contour
        return cls(
            task_id=result.task_id,
            pattern=pattern,
            cents=cents,
            inverted=inverted,
            base_hz=round(c.base_hz, 6),
            band_cents=c.band.half_width_cents,
            onset_ms=result.onset_ms,
            times_ms=c.times_ms,
            target_hz=tuple(round(v, 6) for v in c.target_hz),
            upper_hz=tuple(round(v, 6) for v in c.upper_hz),
            lower_hz=tuple(round(v, 6) for v in c.lower_hz),
            change_times_ms=c.change_times_ms,
            score=round(result.score, 6),
            category=result.category.value,
        )

    def to_json(self) -> str:
        doc = {
            "task_id": self.task_id,
            "pattern": self.pattern,
            "cents": _num(self.cents),
            "inverted": self.inverted,
            "base_hz": _num(self.base_hz),
            "band_cents": _num(self.band_cents),
            "onset_ms": _num(self.onset_ms),
            "times_ms": [_num(v) for v in self.times_ms],
            "target_hz": [_num(v) for v in self.target_hz],
            "upper_hz": [_num(v) for v in self.upper_hz],
            "lower_hz": [_num(v) for v in self.lower_hz],
            "change_times_ms": [_num(v) for v in self.change_times_ms],
            "score": _num(self.score),
            "category": self.category,
        }
        return json.dumps(doc, separators=(",", ":"))


def _num(value: float) -> float | int:
    """Collapse integral floats so 1500.0 serializes as 1500."""
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def format_ms(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return f"{value:.3f}"


def sanitize_subject_id(subject_id: str) -> str:
    cleaned = _UNSAFE.sub("_", subject_id.strip())
    if not cleaned:
        raise ValueError("subject id is empty after sanitization")
    return cleaned


def open_session_folder(root: str | os.PathLike, subject_id: str,
                        start_stamp: str) -> Path:
    """Create <root>/<subject>/<start>/, suffixing on collision."""
    subject = sanitize_subject_id(subject_id)
    stamp = _UNSAFE.sub("-", start_stamp)
    base = Path(root) / subject / stamp
    folder = base
    n = 1
    while folder.exists():
        n += 1
        folder = base.with_name(f"{base.name}_{n}")
    if folder != base:
        print(f"warning: session folder existed, using {folder}", file=sys.stderr)
    folder.mkdir(parents=True)
    return folder


class SessionLog:
    """Single-writer log set for one session.

    Write failures are retried once, then counted and swallowed: logging
    must never stall the session thread.
    """

    def __init__(self, folder: Path):
        self.folder = Path(folder)
        self._pitch = open(self.folder / "pitch.csv", "w", buffering=1 << 16)
        self._events = open(self.folder / "events.jsonl", "w", buffering=1 << 16)
        self._tasks = open(self.folder / "tasks.jsonl", "w", buffering=1 << 16)
        self.write_errors = 0
        self._safe_write(self._pitch, PITCH_CSV_HEADER + "\n")

    def _safe_write(self, fh, text: str) -> None:
        for _ in range(2):
            try:
                fh.write(text)
                return
            except OSError:
                continue
        self.write_errors += 1

    def append_pitch(self, frame: PitchFrame) -> None:
        if frame.voiced:
            row = (
                f"{format_ms(frame.time_ms)},{frame.f0_hz:.3f},1,"
                f"{frame.aperiodicity:.3f},{frame.rms:.3f}"
            )
        else:
            row = f"{format_ms(frame.time_ms)},,0,,{frame.rms:.3f}"
        self._safe_write(self._pitch, row + "\n")

    def append_event(self, rec: EventRecord) -> None:
        self._safe_write(self._events, rec.to_json() + "\n")

    def append_task(self, rec: TaskRecord) -> None:
        self._safe_write(self._tasks, rec.to_json() + "\n")

    def write_config(self, snapshot: dict[str, Any]) -> None:
        path = self.folder / "config.json"
        with open(path, "w") as fh:
            json.dump(snapshot, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def flush(self) -> None:
        for fh in (self._pitch, self._events, self._tasks):
            if not fh.closed:
                try:
                    fh.flush()
                except OSError:
                    self.write_errors += 1

    def close(self) -> None:
        self.flush()
        for fh in (self._pitch, self._events, self._tasks):
            if not fh.closed:
                fh.close()
