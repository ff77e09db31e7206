"""Shared fixtures and frame-fabrication helpers."""
from __future__ import annotations

import pytest

from pitchtrace import PitchFrame, Session, SessionConfig, TaskSpec
from pitchtrace.session import SIMULATED_CLOCK_ANCHOR
from pitchtrace.targets import Pattern


def voiced_frame(time_ms: float, f0_hz: float, rms: float = 0.2) -> PitchFrame:
    return PitchFrame(time_ms=time_ms, f0_hz=f0_hz, aperiodicity=0.05, rms=rms)


def unvoiced_frame(time_ms: float, rms: float = 0.002) -> PitchFrame:
    return PitchFrame(time_ms=time_ms, f0_hz=None, aperiodicity=None, rms=rms)


def frame_ramp(f0s, hop_ms: float, t0: float = 0.0) -> list[PitchFrame]:
    """One frame per hop; None entries become unvoiced frames."""
    frames = []
    for i, f0 in enumerate(f0s):
        t = t0 + i * hop_ms
        frames.append(voiced_frame(t, f0) if f0 is not None else unvoiced_frame(t))
    return frames


def constant_frames(f0_hz, n: int, hop_ms: float, t0: float = 0.0):
    return frame_ramp([f0_hz] * n, hop_ms, t0)


def hop_clock(hop_ms: float, t0: float = 0.0):
    """Endless per-hop timestamps starting at t0."""
    t = t0
    while True:
        yield t
        t += hop_ms


def contour_following_frames(contour, t0: float, extra_hops: int = 2):
    """Frames from t0 that sing the contour exactly, then rest on base."""
    frames = []
    hop = contour.hop_ms
    n_task = round(contour.duration_ms / hop)
    for i in range(n_task + extra_hops):
        t = t0 + i * hop
        hz = contour.target_hz[min(i, len(contour.target_hz) - 1)]
        frames.append(voiced_frame(t, hz))
    return frames


DEFAULT_TASKS = [
    TaskSpec(id="sustain", pattern=Pattern.SUSTAIN, cents=0.0, duration_ms=3000.0),
    TaskSpec(id="step", pattern=Pattern.STEP, cents=300.0, duration_ms=3000.0),
    TaskSpec(id="ramp", pattern=Pattern.RAMP, cents=300.0, duration_ms=3000.0),
    TaskSpec(id="peak", pattern=Pattern.PEAK, cents=300.0, duration_ms=3000.0),
    TaskSpec(id="oscillate", pattern=Pattern.OSCILLATE, cents=300.0,
             duration_ms=3000.0),
]


@pytest.fixture
def make_session(tmp_path):
    """Factory for frame-driven sessions logging under the test tmp dir."""

    sessions = []

    def factory(tasks=None, auto_run=False, **cfg_kwargs):
        cfg_kwargs.setdefault("log_root", str(tmp_path / "sessions"))
        cfg_kwargs.setdefault("subject_id", "T01")
        cfg_kwargs.setdefault("countdown_s", 1.0)
        cfg_kwargs.setdefault("delay_base_ms", 200.0)
        cfg = SessionConfig(**cfg_kwargs)
        session = Session(
            cfg,
            tasks if tasks is not None else list(DEFAULT_TASKS),
            clock_anchor=SIMULATED_CLOCK_ANCHOR,
            auto_run=auto_run,
        )
        sessions.append(session)
        return session

    yield factory
    for session in sessions:
        if session.active:
            session.request_stop()


def read_events(folder):
    import json

    with open(folder / "events.jsonl") as fh:
        return [json.loads(line) for line in fh]


def events_of_kind(events, kind: str):
    return [e for e in events if e["kind"] == kind]


def make_task(pattern=Pattern.STEP, cents=300.0, duration_ms=3000.0, **kw):
    return TaskSpec(id=kw.pop("id", pattern.value), pattern=pattern, cents=cents,
                    duration_ms=duration_ms, **kw)


def run_one_trial(session, task, base_hz=200.0, sing=None):
    """Drive a trial with fabricated frames; returns the TrialResult.

    sing(rel_ms, contour) -> f0 or None decides the tracking frames;
    default sings the exact target. On the target-onset frame the contour
    does not exist yet, so sing is called with contour=None and rel 0.
    """
    cfg = session.cfg
    hop = cfg.hop_ms
    clock = hop_clock(hop, session.now + (hop if session.now > 0 else 0.0))
    session.begin_trial(task)
    onset_pred = session.now + cfg.countdown_s * 1000.0 + cfg.baseline_ms

    before = len(session.results)
    for _ in range(10000):
        t = next(clock)
        state = session.active_contour()
        if state is not None:
            contour, onset = state
            rel = t - onset
            if sing is None:
                idx = contour.index_at(min(rel, contour.duration_ms))
                f0 = contour.target_hz[idx]
            else:
                f0 = sing(rel, contour)
        elif t >= onset_pred and sing is not None:
            f0 = sing(t - onset_pred, None)
        else:
            f0 = base_hz
        frame = voiced_frame(t, f0) if f0 is not None else unvoiced_frame(t)
        session.handle_frame(frame)
        if len(session.results) > before:
            return session.results[-1]
    raise AssertionError("trial did not complete")
