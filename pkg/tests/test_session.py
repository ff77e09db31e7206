"""Frame-driven session state machine: trial lifecycle, baseline capture,
live-tunable config, task queue, and the event-log invariants."""
import json
import random

import pytest

from pitchtrace.grading import Feedback
from pitchtrace.session import (
    LEGAL_TRANSITIONS,
    BaselineError,
    GuidanceMode,
    NoTaskError,
    SessionError,
    TaskQueueEntry,
    TrialPhase,
    capture_baseline,
    next_task,
)
from pitchtrace.targets import Pattern

from conftest import (
    events_of_kind,
    hop_clock,
    make_task,
    read_events,
    run_one_trial,
    unvoiced_frame,
    voiced_frame,
)

HOP = 50.0


class TestCaptureBaseline:
    def test_constant_pitch(self):
        frames = [voiced_frame(i * HOP, 200.0) for i in range(30)]
        assert capture_baseline(frames) == 200.0

    def test_symmetric_set_gives_median(self):
        f0s = [198.0, 199.0, 200.0, 201.0, 202.0]
        frames = [voiced_frame(i * HOP, f) for i, f in enumerate(f0s)]
        assert capture_baseline(frames) == 200.0

    def test_insufficient_voicing_raises(self):
        frames = [voiced_frame(0.0, 200.0)] + [
            unvoiced_frame(i * HOP) for i in range(1, 30)
        ]
        with pytest.raises(BaselineError):
            capture_baseline(frames, 0.5)

    def test_median_robust_to_octave_glitch(self):
        frames = [voiced_frame(i * HOP, 200.0) for i in range(29)]
        frames.append(voiced_frame(29 * HOP, 400.0))
        assert capture_baseline(frames) == 200.0


class TestNextTask:
    def test_single_enabled_always_chosen(self):
        entry = TaskQueueEntry(make_task(Pattern.STEP))
        rng = random.Random(0)
        queue = [entry, TaskQueueEntry(make_task(Pattern.RAMP, id="r"),
                                       enabled=False)]
        for _ in range(50):
            assert next_task(queue, rng) is entry.task

    def test_all_disabled_raises(self):
        queue = [TaskQueueEntry(make_task(Pattern.STEP), enabled=False)]
        with pytest.raises(NoTaskError):
            next_task(queue, random.Random(0))

    def test_two_enabled_split_evenly(self):
        # seed 1234 frozen; binomial(10000, 0.5) stays within 5000 +/- 300
        queue = [
            TaskQueueEntry(make_task(Pattern.STEP, id="a")),
            TaskQueueEntry(make_task(Pattern.RAMP, id="b")),
        ]
        rng = random.Random(1234)
        counts = {"a": 0, "b": 0}
        for _ in range(10000):
            counts[next_task(queue, rng).id] += 1
        assert abs(counts["a"] - 5000) <= 300


class TestStartStop:
    def test_start_creates_folder_and_logs(self, make_session):
        session = make_session()
        folder = session.start()
        assert folder.is_dir()
        assert (folder / "config.json").exists()
        events = read_events(folder) if False else None
        session.request_stop()
        assert (folder / "pitch.csv").exists()
        names = {p.name for p in folder.iterdir()}
        assert "events.jsonl" in names and "tasks.jsonl" in names
        assert any(n.endswith(".wav") for n in names)

    def test_second_start_rejected(self, make_session):
        session = make_session()
        session.start()
        with pytest.raises(SessionError):
            session.start()

    def test_invalid_hop_rejected(self, make_session):
        with pytest.raises(ValueError):
            make_session(hop_ms=30.0)

    def test_stop_without_start_rejected(self, make_session):
        session = make_session()
        with pytest.raises(SessionError):
            session.request_stop()

    def test_stop_mid_trial_logs_abort(self, make_session):
        session = make_session()
        folder = session.start()
        session.begin_trial(make_task(Pattern.STEP))
        session.handle_frame(voiced_frame(0.0, 200.0))
        session.request_stop()
        events = read_events(folder)
        aborted = events_of_kind(events, "TrialAborted")
        assert len(aborted) == 1
        assert aborted[0]["payload"]["reason"] == "stopped"
        assert [e["kind"] for e in events[-2:]] == ["SessionStop", "TtlSent"]

    def test_summary_counts_completed_trials(self, make_session):
        session = make_session()
        session.start()
        for _ in range(3):
            run_one_trial(session, make_task(Pattern.SUSTAIN, cents=0.0,
                                             duration_ms=1000.0))
            # let the inter-trial delay expire back to idle
            clock = hop_clock(HOP, session.now + HOP)
            while session.phase is not TrialPhase.IDLE:
                session.handle_frame(voiced_frame(next(clock), 200.0))
        summary = session.request_stop()
        assert summary["trials_completed"] == 3
        assert summary["per_task"]["sustain"]["completed"] == 3
        assert summary["per_task"]["sustain"]["mean_score"] == 1.0


class TestTrialFlow:
    def test_perfect_tracking_scores_smiley(self, make_session):
        session = make_session()
        session.start()
        result = run_one_trial(session, make_task(Pattern.STEP))
        assert result.score == 1.0
        assert result.category is Feedback.SMILEY
        assert len(result.frames) == 60

    def test_silent_subject_scores_angry(self, make_session):
        session = make_session()
        session.start()
        result = run_one_trial(
            session, make_task(Pattern.SUSTAIN, cents=0.0),
            sing=lambda rel, contour: None,
        )
        assert result.score == 0.0
        assert result.category is Feedback.ANGRY

    def test_event_sequence_for_one_trial(self, make_session):
        session = make_session(countdown_s=3.0)
        folder = session.start()
        run_one_trial(session, make_task(Pattern.STEP))
        session.request_stop()
        events = read_events(folder)
        kinds = [e["kind"] for e in events if e["kind"] not in ("TtlSent",)]
        assert kinds[:2] == ["SessionStart", "TaskPrompt"]
        assert kinds.count("Countdown") == 3
        for expected in ("GoCue", "BaselineStart", "BaselineResult",
                         "TargetOnset", "TrialComplete"):
            assert expected in kinds

    def test_countdown_spans_configured_seconds(self, make_session):
        session = make_session(countdown_s=3.0)
        folder = session.start()
        run_one_trial(session, make_task(Pattern.STEP))
        session.request_stop()
        events = read_events(folder)
        prompt = events_of_kind(events, "TaskPrompt")[0]
        go = events_of_kind(events, "GoCue")[0]
        assert go["time_ms"] - prompt["time_ms"] == pytest.approx(3000.0, abs=HOP)

    def test_baseline_spans_1500ms_and_30_frames(self, make_session):
        session = make_session()
        folder = session.start()
        run_one_trial(session, make_task(Pattern.STEP))
        session.request_stop()
        events = read_events(folder)
        start = events_of_kind(events, "BaselineStart")[0]
        result = events_of_kind(events, "BaselineResult")[0]
        span = result["time_ms"] - start["time_ms"]
        assert abs(span - 1500.0) <= HOP
        assert result["payload"]["ok"] is True
        assert result["payload"]["base_hz"] == pytest.approx(200.0, abs=0.01)

    def test_baseline_uses_median_of_voiced(self, make_session):
        session = make_session()
        session.start()
        session.begin_trial(make_task(Pattern.SUSTAIN, cents=0.0))
        clock = hop_clock(HOP)
        # countdown (1 s in fixture config)
        for _ in range(int(1000 / HOP)):
            session.handle_frame(voiced_frame(next(clock), 190.0))
        # baseline window: alternate 195/205 -> median 200
        for i in range(30):
            session.handle_frame(
                voiced_frame(next(clock), 195.0 if i % 2 else 205.0)
            )
        session.handle_frame(voiced_frame(next(clock), 200.0))
        contour, _ = session.active_contour()
        assert contour.base_hz == 200.0

    def test_baseline_failure_restarts_countdown(self, make_session):
        session = make_session()
        folder = session.start()
        session.begin_trial(make_task(Pattern.STEP))
        clock = hop_clock(HOP)
        for _ in range(int(1000 / HOP)):
            session.handle_frame(voiced_frame(next(clock), 200.0))
        for _ in range(30):
            session.handle_frame(unvoiced_frame(next(clock)))
        session.handle_frame(unvoiced_frame(next(clock)))
        assert session.phase is TrialPhase.COUNTDOWN
        events = read_events(folder)
        fails = [e for e in events_of_kind(events, "BaselineResult")
                 if not e["payload"]["ok"]]
        assert len(fails) == 1
        session.request_stop()

    def test_three_baseline_failures_skip_task(self, make_session):
        session = make_session()
        folder = session.start()
        session.begin_trial(make_task(Pattern.STEP))
        clock = hop_clock(HOP)
        for _ in range(3):
            while session.phase is not TrialPhase.BASELINE_CAPTURE:
                session.handle_frame(unvoiced_frame(next(clock)))
            while session.phase is TrialPhase.BASELINE_CAPTURE:
                session.handle_frame(unvoiced_frame(next(clock)))
        assert session.phase is TrialPhase.INTER_TRIAL_DELAY
        events = read_events(folder)
        aborted = events_of_kind(events, "TrialAborted")
        assert len(aborted) == 1
        assert aborted[0]["payload"]["reason"] == "baseline_failure"
        assert session.trials_completed == 0
        session.request_stop()

    def test_playback_phase_present_only_when_enabled(self, make_session):
        for enabled in (False, True):
            session = make_session(playback_enabled=enabled,
                                   subject_id=f"P{int(enabled)}")
            folder = session.start()
            run_one_trial(session, make_task(Pattern.SUSTAIN, cents=0.0,
                                             duration_ms=1000.0))
            if enabled:
                clock = hop_clock(HOP, session.now + HOP)
                while session.phase is TrialPhase.PLAYBACK:
                    session.handle_frame(voiced_frame(next(clock), 200.0))
            session.request_stop()
            events = read_events(folder)
            starts = events_of_kind(events, "PlaybackStart")
            ends = events_of_kind(events, "PlaybackEnd")
            if enabled:
                assert len(starts) == 1 and len(ends) == 1
                assert ends[0]["time_ms"] - starts[0]["time_ms"] == pytest.approx(
                    1000.0, abs=HOP
                )
            else:
                assert starts == [] and ends == []


class TestApplyUpdate:
    def test_grading_change_mid_trial_applies_now(self, make_session):
        session = make_session()
        session.start()
        task = make_task(Pattern.SUSTAIN, cents=0.0)

        def sing(rel, contour):
            # in-band 78% of the task: above smiley_min=0.75, below 0.8
            n = round(contour.duration_ms / contour.hop_ms)
            return contour.target_hz[0] if rel < 0.78 * n * HOP else None

        session.begin_trial(task)
        clock = hop_clock(HOP)
        for _ in range(5):
            session.handle_frame(voiced_frame(next(clock), 200.0))
        session.apply_update({"grading": {"smiley_min": 0.8}})
        for _ in range(int(1000 / HOP) - 5 + 31):
            session.handle_frame(voiced_frame(next(clock), 200.0))
        result = None
        while result is None:
            contour_state = session.active_contour()
            t = next(clock)
            if contour_state is not None:
                contour, onset = contour_state
                f0 = sing(t - onset, contour)
                session.handle_frame(
                    voiced_frame(t, f0) if f0 else unvoiced_frame(t)
                )
            else:
                session.handle_frame(voiced_frame(t, 200.0))
            if session.results:
                result = session.results[-1]
        assert 0.75 < result.score < 0.8
        assert result.category is Feedback.NEUTRAL

    def test_immutable_field_rejected(self, make_session):
        session = make_session()
        session.start()
        with pytest.raises(SessionError):
            session.apply_update({"hop_ms": 25.0})
        with pytest.raises(SessionError):
            session.apply_update({"sample_rate_hz": 48000})

    def test_invalid_patch_rejected_whole(self, make_session):
        session = make_session()
        folder = session.start()
        before = session.cfg.guidance_mode
        with pytest.raises(SessionError):
            session.apply_update(
                {"guidance_mode": "sparse", "grading": {"smiley_min": 1.5}}
            )
        assert session.cfg.guidance_mode is before
        session.request_stop()
        events = read_events(folder)
        rejected = [
            e for e in events_of_kind(events, "ParamUpdate")
            if e["payload"].get("accepted") is False
        ]
        assert len(rejected) == 1

    def test_unknown_field_rejected(self, make_session):
        session = make_session()
        session.start()
        with pytest.raises(SessionError):
            session.apply_update({"bogus_field": 1})

    def test_contour_fields_wait_for_next_trial(self, make_session):
        session = make_session()
        session.start()
        task = make_task(Pattern.STEP, cents=None)  # placeholder below
        session.queue_edit(
            {"op": "add", "task": {"id": "flex", "pattern": "step"}}
        )
        session.begin_trial(
            next(e.task for e in session.queue if e.task.id == "flex")
        )
        clock = hop_clock(HOP)
        session.handle_frame(voiced_frame(next(clock), 200.0))
        session.apply_update({"cents_default": 100.0})
        assert session._pending_trial  # staged, not applied
        while session.active_contour() is None:
            session.handle_frame(voiced_frame(next(clock), 200.0))
        contour, _ = session.active_contour()
        # this trial still uses the old default (300)
        assert contour.target_hz[-1] == pytest.approx(
            200.0 * 2 ** (300.0 / 1200.0), rel=1e-3
        )
        session.request_stop()

    def test_param_update_event_logged(self, make_session):
        session = make_session()
        folder = session.start()
        session.apply_update({"guidance_mode": "sparse"})
        assert session.cfg.guidance_mode is GuidanceMode.SPARSE
        session.request_stop()
        events = read_events(folder)
        updates = events_of_kind(events, "ParamUpdate")
        assert any(
            u["payload"].get("accepted") and "guidance_mode" in u["payload"]["patch"]
            for u in updates
        )


class TestQueueEdits:
    def test_disable_excludes_from_draw(self, make_session):
        session = make_session(auto_run=False)
        session.start()
        session.queue_edit({"op": "disable", "task_id": "step"})
        enabled = [e.task.id for e in session.queue if e.enabled]
        assert "step" not in enabled
        rng = random.Random(0)
        for _ in range(100):
            assert next_task(session.queue, rng).id != "step"

    def test_invert_mirrors_next_contour(self, make_session):
        session = make_session()
        session.start()
        entry = next(e for e in session.queue if e.task.id == "step")
        r1 = run_one_trial(session, entry.task)
        clock = hop_clock(HOP, session.now + HOP)
        while session.phase is not TrialPhase.IDLE:
            session.handle_frame(voiced_frame(next(clock), 200.0))
        session.queue_edit({"op": "invert", "task_id": "step"})
        r2 = run_one_trial(session, entry.task)
        up = [t / r1.contour.base_hz for t in r1.contour.target_hz]
        down = [t / r2.contour.base_hz for t in r2.contour.target_hz]
        for a, b in zip(up, down):
            assert a * b == pytest.approx(1.0, rel=1e-9)

    def test_remove_and_unknown_id(self, make_session):
        session = make_session()
        session.start()
        session.queue_edit({"op": "remove", "task_id": "peak"})
        assert all(e.task.id != "peak" for e in session.queue)
        with pytest.raises(SessionError):
            session.queue_edit({"op": "disable", "task_id": "peak"})

    def test_add_duplicate_rejected(self, make_session):
        session = make_session()
        session.start()
        with pytest.raises(SessionError):
            session.queue_edit(
                {"op": "add", "task": {"id": "step", "pattern": "step"}}
            )


EVENT_TO_PHASE = {
    "Countdown": TrialPhase.COUNTDOWN,
    "GoCue": TrialPhase.GO_CUE,
    "BaselineStart": TrialPhase.BASELINE_CAPTURE,
    "TargetOnset": TrialPhase.TRACKING,
    "PlaybackStart": TrialPhase.PLAYBACK,
}


class TestLogInvariants:
    def run_multi_trial_session(self, make_session, **kw):
        session = make_session(auto_run=True, n_trials=3, playback_enabled=True,
                               **kw)
        folder = session.start()
        clock = hop_clock(HOP)
        while not session.experiment_done:
            t = next(clock)
            state = session.active_contour()
            if state is not None:
                contour, onset = state
                idx = contour.index_at(min(t - onset, contour.duration_ms))
                session.handle_frame(voiced_frame(t, contour.target_hz[idx]))
            else:
                session.handle_frame(voiced_frame(t, 200.0))
        session.request_stop()
        return folder

    def test_event_times_monotone(self, make_session):
        folder = self.run_multi_trial_session(make_session)
        events = read_events(folder)
        times = [e["time_ms"] for e in events]
        assert times == sorted(times)

    def test_phase_path_is_legal(self, make_session):
        folder = self.run_multi_trial_session(make_session)
        events = read_events(folder)
        phase = TrialPhase.IDLE
        for event in events:
            nxt = EVENT_TO_PHASE.get(event["kind"])
            if nxt is None or nxt is phase:
                continue
            reachable = {phase}
            frontier = LEGAL_TRANSITIONS[phase]
            # grading and delay are silent in the log; close over them
            hops = 0
            while nxt not in frontier and hops < 4:
                frontier = set().union(
                    *(LEGAL_TRANSITIONS[p] for p in frontier)
                ) | frontier
                hops += 1
            assert nxt in frontier, (phase, nxt, event)
            phase = nxt

    def test_completed_counts_match_trial_complete_events(self, make_session):
        folder = self.run_multi_trial_session(make_session)
        events = read_events(folder)
        completes = events_of_kind(events, "TrialComplete")
        with open(folder / "tasks.jsonl") as fh:
            tasks = [json.loads(line) for line in fh]
        assert len(completes) == len(tasks) == 3

    def test_every_trial_complete_has_matching_task_record(self, make_session):
        folder = self.run_multi_trial_session(make_session)
        events = read_events(folder)
        with open(folder / "tasks.jsonl") as fh:
            tasks = [json.loads(line) for line in fh]
        for complete, record in zip(events_of_kind(events, "TrialComplete"), tasks):
            assert complete["payload"]["task_id"] == record["task_id"]
            assert complete["payload"]["score"] == record["score"]
