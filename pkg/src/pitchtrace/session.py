"""Per-trial lifecycle and the experiment-level task queue.

One logical owner (the session) consumes pitch frames, control commands,
and sample-clock deadlines in a single ordered stream; nothing else
mutates session state. Every timestamp is derived from the audio sample
count, which makes a simulated run bit-reproducible end to end.

Trial flow: Countdown -> GoCue -> BaselineCapture (1.5 s, median of voiced
pitch) -> Tracking against the generated contour -> Grading -> optional
Playback -> InterTrialDelay, then the next task is drawn from the enabled
queue entries with the session's seeded RNG.
"""
from __future__ import annotations

import random
import statistics
import time as _time
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from .audio import SampleBlock, WavWriter
from .grading import (
    GradingConfig,
    GuidanceArrow,
    TrialResult,
    dense_guidance,
    feedback_category,
    score_trial,
    sparse_guidance,
    _arrow_for,
)
from .logs import (
    EventKind,
    EventRecord,
    SessionLog,
    TaskRecord,
    open_session_folder,
    sanitize_subject_id,
)
from .pitch import FrameStream, PitchConfig, PitchFrame, yin_estimate
from .targets import (
    GradingBand,
    Pattern,
    TargetContour,
    TaskSpec,
    generate_contour,
    invert_task,
)
from .ttl import TTL_CODES, TtlSender

__all__ = [
    "GuidanceMode",
    "TrialPhase",
    "SessionConfig",
    "TaskQueueEntry",
    "Session",
    "TelemetryHub",
    "SessionError",
    "BaselineError",
    "NoTaskError",
    "capture_baseline",
    "next_task",
    "task_from_dict",
    "task_to_dict",
    "entry_from_dict",
    "LEGAL_TRANSITIONS",
    "SIMULATED_CLOCK_ANCHOR",
]

SIMULATED_CLOCK_ANCHOR = "1970-01-01T00:00:00"

MAX_BASELINE_ATTEMPTS = 3


class SessionError(Exception):
    pass


class BaselineError(SessionError):
    pass


class NoTaskError(SessionError):
    pass


class GuidanceMode(Enum):
    NONE = "none"
    DENSE = "dense"
    SPARSE = "sparse"


class TrialPhase(Enum):
    IDLE = "idle"
    COUNTDOWN = "countdown"
    GO_CUE = "go_cue"
    BASELINE_CAPTURE = "baseline_capture"
    TRACKING = "tracking"
    GRADING = "grading"
    PLAYBACK = "playback"
    INTER_TRIAL_DELAY = "inter_trial_delay"


# Forward path plus: baseline retry, baseline give-up skipping to the delay,
# and a stop from anywhere back to idle.
LEGAL_TRANSITIONS: dict[TrialPhase, set[TrialPhase]] = {
    TrialPhase.IDLE: {TrialPhase.COUNTDOWN, TrialPhase.IDLE},
    TrialPhase.COUNTDOWN: {TrialPhase.GO_CUE, TrialPhase.IDLE},
    TrialPhase.GO_CUE: {TrialPhase.BASELINE_CAPTURE, TrialPhase.IDLE},
    TrialPhase.BASELINE_CAPTURE: {
        TrialPhase.TRACKING,
        TrialPhase.COUNTDOWN,
        TrialPhase.INTER_TRIAL_DELAY,
        TrialPhase.IDLE,
    },
    TrialPhase.TRACKING: {TrialPhase.GRADING, TrialPhase.IDLE},
    TrialPhase.GRADING: {
        TrialPhase.PLAYBACK,
        TrialPhase.INTER_TRIAL_DELAY,
        TrialPhase.IDLE,
    },
    TrialPhase.PLAYBACK: {TrialPhase.INTER_TRIAL_DELAY, TrialPhase.IDLE},
    TrialPhase.INTER_TRIAL_DELAY: {TrialPhase.COUNTDOWN, TrialPhase.IDLE},
}

_EVENT_PHASE: dict[EventKind, TrialPhase] = {
    EventKind.COUNTDOWN: TrialPhase.COUNTDOWN,
    EventKind.GO_CUE: TrialPhase.GO_CUE,
    EventKind.BASELINE_START: TrialPhase.BASELINE_CAPTURE,
    EventKind.TARGET_ONSET: TrialPhase.TRACKING,
    EventKind.PLAYBACK_START: TrialPhase.PLAYBACK,
}


@dataclass
class SessionConfig:
    """Everything the proctor can configure, with live-tunability noted.

    guidance_mode and the grading fractions apply immediately (mid-trial);
    contour-shaping fields (cents_default, band) wait for the next trial;
    sample_rate_hz, hop_ms, window_size, the detector band/threshold and
    subject_id are immutable once a session starts.
    """

    subject_id: str = "S00"
    sample_rate_hz: int = 44100
    hop_ms: float = 50.0
    window_size: int = 2048
    f_min_hz: float = 60.0
    f_max_hz: float = 600.0
    yin_threshold: float = 0.15
    rms_gate: float = 0.01
    guidance_mode: GuidanceMode = GuidanceMode.DENSE
    guidance_window_ms: float = 150.0
    grading: GradingConfig = field(default_factory=GradingConfig)
    band: GradingBand = field(default_factory=GradingBand)
    cents_default: float = 300.0
    countdown_s: float = 3.0
    baseline_ms: float = 1500.0
    baseline_min_voiced: float = 0.5
    playback_enabled: bool = False
    delay_base_ms: float = 1000.0
    delay_jitter_ms: float = 0.0
    n_trials: int = 5
    y_axis_center_hz: float = 200.0
    seed: int = 0
    log_root: str = "sessions"
    ttl_port: str | None = None
    ttl_baud: int = 115200

    IMMUTABLE_FIELDS = frozenset(
        {
            "subject_id",
            "sample_rate_hz",
            "hop_ms",
            "window_size",
            "f_min_hz",
            "f_max_hz",
            "yin_threshold",
            "rms_gate",
            "seed",
            "log_root",
        }
    )
    IMMEDIATE_FIELDS = frozenset(
        {"guidance_mode", "grading", "guidance_window_ms", "y_axis_center_hz"}
    )
    TRIAL_BOUNDARY_FIELDS = frozenset({"cents_default", "band"})

    def validate(self) -> None:
        sanitize_subject_id(self.subject_id)
        self.pitch_config().validate()
        for name in ("countdown_s", "baseline_ms", "delay_base_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.delay_jitter_ms < 0:
            raise ValueError("delay_jitter_ms must be >= 0")
        if not 0.0 < self.baseline_min_voiced <= 1.0:
            raise ValueError("baseline_min_voiced must be in (0, 1]")
        if self.guidance_window_ms < 0:
            raise ValueError("guidance_window_ms must be >= 0")
        if self.n_trials < 0:
            raise ValueError("n_trials must be >= 0")

    def pitch_config(self) -> PitchConfig:
        return PitchConfig(
            sample_rate_hz=self.sample_rate_hz,
            window_size=self.window_size,
            hop_ms=self.hop_ms,
            f_min_hz=self.f_min_hz,
            f_max_hz=self.f_max_hz,
            yin_threshold=self.yin_threshold,
            rms_gate=self.rms_gate,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject_id": self.subject_id,
            "sample_rate_hz": self.sample_rate_hz,
            "hop_ms": self.hop_ms,
            "window_size": self.window_size,
            "f_min_hz": self.f_min_hz,
            "f_max_hz": self.f_max_hz,
            "yin_threshold": self.yin_threshold,
            "rms_gate": self.rms_gate,
            "guidance_mode": self.guidance_mode.value,
            "guidance_window_ms": self.guidance_window_ms,
            "grading": {
                "smiley_min": self.grading.smiley_min,
                "angry_max": self.grading.angry_max,
            },
            "band": {"half_width_cents": self.band.half_width_cents},
            "cents_default": self.cents_default,
            "countdown_s": self.countdown_s,
            "baseline_ms": self.baseline_ms,
            "baseline_min_voiced": self.baseline_min_voiced,
            "playback_enabled": self.playback_enabled,
            "delay_base_ms": self.delay_base_ms,
            "delay_jitter_ms": self.delay_jitter_ms,
            "n_trials": self.n_trials,
            "y_axis_center_hz": self.y_axis_center_hz,
            "seed": self.seed,
            "log_root": self.log_root,
            "ttl_port": self.ttl_port,
            "ttl_baud": self.ttl_baud,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "SessionConfig":
        kwargs = dict(doc)
        if "guidance_mode" in kwargs:
            kwargs["guidance_mode"] = GuidanceMode(kwargs["guidance_mode"])
        if "grading" in kwargs:
            kwargs["grading"] = GradingConfig(**kwargs["grading"])
        if "band" in kwargs:
            kwargs["band"] = GradingBand(**kwargs["band"])
        return cls(**kwargs)


@dataclass
class TaskQueueEntry:
    task: TaskSpec
    enabled: bool = True
    completed_count: int = 0
    # tasks defined without explicit cents track the live cents_default
    follows_default: bool = False


def task_from_dict(doc: dict[str, Any], default_cents: float) -> TaskSpec:
    pattern = Pattern(doc["pattern"])
    cents = doc.get("cents")
    if cents is None:
        cents = 0.0 if pattern is Pattern.SUSTAIN else default_cents
    kwargs = {}
    for key in ("step_fraction", "peak_fraction"):
        if key in doc:
            kwargs[key] = float(doc[key])
    return TaskSpec(
        id=str(doc.get("id", pattern.value)),
        pattern=pattern,
        cents=float(cents),
        duration_ms=float(doc.get("duration_ms", 3000.0)),
        inverted=bool(doc.get("inverted", False)),
        **kwargs,
    )


def entry_from_dict(doc: dict[str, Any], default_cents: float) -> TaskQueueEntry:
    task = task_from_dict(doc, default_cents)
    follows = "cents" not in doc and task.pattern is not Pattern.SUSTAIN
    return TaskQueueEntry(
        task=task,
        enabled=bool(doc.get("enabled", True)),
        follows_default=follows,
    )


def task_to_dict(task: TaskSpec) -> dict[str, Any]:
    return {
        "id": task.id,
        "pattern": task.pattern.value,
        "cents": task.cents,
        "duration_ms": task.duration_ms,
        "inverted": task.inverted,
        "step_fraction": task.step_fraction,
        "peak_fraction": task.peak_fraction,
    }


def capture_baseline(
    frames: Iterable[PitchFrame], min_voiced_fraction: float = 0.5
) -> float:
    """Median of voiced pitch over the baseline window.

    The median shrugs off the occasional octave glitch; raises
    BaselineError when voicing coverage is too thin to trust.
    """
    frames = list(frames)
    if not frames:
        raise BaselineError("no frames in baseline window")
    voiced = [f.f0_hz for f in frames if f.voiced]
    fraction = len(voiced) / len(frames)
    if fraction < min_voiced_fraction:
        raise BaselineError(
            f"only {fraction:.0%} of baseline frames voiced "
            f"(need {min_voiced_fraction:.0%})"
        )
    return float(statistics.median(voiced))


def next_task(queue: list[TaskQueueEntry], rng: random.Random) -> TaskSpec:
    """Uniform draw among enabled queue entries."""
    enabled = [entry for entry in queue if entry.enabled]
    if not enabled:
        raise NoTaskError("no enabled tasks in the queue")
    return rng.choice(enabled).task


class TelemetryHub:
    """Fan-out of immutable telemetry dicts to any number of subscribers."""

    def __init__(self):
        self._subscribers: list[Callable[[dict], None]] = []

    def subscribe(self, fn: Callable[[dict], None]) -> None:
        self._subscribers.append(fn)

    def unsubscribe(self, fn: Callable[[dict], None]) -> None:
        if fn in self._subscribers:
            self._subscribers.remove(fn)

    def publish(self, msg: dict) -> None:
        for fn in list(self._subscribers):
            fn(msg)


@dataclass
class _Trial:
    entry: TaskQueueEntry
    task: TaskSpec
    attempt: int = 1
    go_time_ms: float = 0.0
    baseline_frames: list[PitchFrame] = field(default_factory=list)
    base_hz: float | None = None
    contour: TargetContour | None = None
    onset_ms: float = 0.0
    frames: list[PitchFrame] = field(default_factory=list)
    live_arrows: list[GuidanceArrow] = field(default_factory=list)


class Session:
    """Owns the capture->estimate->grade pipeline for one recording session.

    Not thread-safe by design: exactly one thread (the runner loop, or a
    test driving frames directly) may call handle_block / handle_frame /
    apply_update / request_stop. Telemetry and logs are the only outputs.
    """

    def __init__(
        self,
        cfg: SessionConfig,
        tasks: list[TaskSpec | TaskQueueEntry] | None = None,
        hub: TelemetryHub | None = None,
        ttl: TtlSender | None = None,
        clock_anchor: str | None = None,
        auto_run: bool = True,
        playback_player: Callable[[float, float], None] | None = None,
    ):
        cfg.validate()
        self.cfg = cfg
        self.queue = [
            t if isinstance(t, TaskQueueEntry) else TaskQueueEntry(task=t)
            for t in (tasks or [])
        ]
        for entry in self.queue:
            entry.task.validate(cfg.hop_ms)
        self.hub = hub or TelemetryHub()
        self.ttl = ttl or TtlSender()
        self.auto_run = auto_run
        self.playback_player = playback_player
        self.rng = random.Random(cfg.seed)
        self.clock_anchor = clock_anchor or datetime.now().isoformat(
            timespec="seconds"
        )

        self.active = False
        self.phase = TrialPhase.IDLE
        self.now = 0.0
        self.results: list[TrialResult] = []
        self.trials_completed = 0
        self.frame_proc_ms: list[float] = []
        self.folder: Path | None = None

        self._pcfg = cfg.pitch_config()
        self._stream = FrameStream(self._pcfg)
        self._log: SessionLog | None = None
        self._wav: WavWriter | None = None
        self._trial: _Trial | None = None
        self._deadline = 0.0
        self._countdown_last = -1
        self._pending_phase: dict[str, Any] = {}
        self._pending_trial: dict[str, Any] = {}
        self._next_sample = 0
        self._scores: dict[str, list[float]] = {}

    # ------------------------------------------------------------------
    # lifecycle

    def start(self) -> Path:
        """Open the log folder, WAV, and TTL; enter Idle. Returns the folder."""
        if self.active:
            raise SessionError("a session is already active")
        stamp = self.clock_anchor
        self.folder = open_session_folder(
            self.cfg.log_root, self.cfg.subject_id, stamp
        )
        self._log = SessionLog(self.folder)
        subject = sanitize_subject_id(self.cfg.subject_id)
        wav_name = f"{subject}_{self.folder.name}.wav"
        self._wav = WavWriter(self.folder / wav_name, self.cfg.sample_rate_hz)

        ttl_connected = False
        if self.cfg.ttl_port:
            ttl_connected = self.ttl.connect(self.cfg.ttl_port, self.cfg.ttl_baud)
            if not ttl_connected:
                self._emit(
                    EventKind.PARAM_UPDATE,
                    {"ttl_connect": {"port": self.cfg.ttl_port, "connected": False}},
                )

        self._log.write_config(
            {
                "config": self.cfg.to_dict(),
                "tasks": [task_to_dict(e.task) for e in self.queue],
                "wall_clock_anchor": stamp,
                "wav_file": wav_name,
                "ttl_codes": TtlSender.code_map(),
                "ttl_connected": ttl_connected,
            }
        )

        self.active = True
        self.phase = TrialPhase.IDLE
        self._emit(
            EventKind.SESSION_START,
            {
                "subject_id": self.cfg.subject_id,
                "sample_rate_hz": self.cfg.sample_rate_hz,
                "hop_ms": self.cfg.hop_ms,
                "n_trials": self.cfg.n_trials,
            },
        )
        self._send_ttl(EventKind.SESSION_START)
        self._publish_snapshot()
        return self.folder

    @property
    def experiment_done(self) -> bool:
        return (
            self.trials_completed >= self.cfg.n_trials
            and self.phase is TrialPhase.IDLE
        )

    def request_stop(self) -> dict[str, Any]:
        """Finalize logs and WAV; returns the session summary."""
        if not self.active:
            raise SessionError("not-active")
        if self._trial is not None and self.phase is not TrialPhase.IDLE:
            self._emit(
                EventKind.TRIAL_ABORTED,
                {"task_id": self._trial.task.id, "reason": "stopped"},
            )
            self._trial = None
        stop_ms = 1000.0 * self._next_sample / self.cfg.sample_rate_hz
        self.now = max(self.now, stop_ms)
        summary = self._summary()
        self._emit(EventKind.SESSION_STOP, summary)
        self._send_ttl(EventKind.SESSION_STOP)
        self.phase = TrialPhase.IDLE
        self.active = False
        if self._log is not None:
            self._log.close()
        if self._wav is not None:
            self._wav.finalize()
        self.ttl.disconnect()
        self.hub.publish({"type": "session_stopped", "summary": summary})
        return summary

    def _summary(self) -> dict[str, Any]:
        per_task = {}
        for entry in self.queue:
            scores = self._scores.get(entry.task.id, [])
            per_task[entry.task.id] = {
                "completed": entry.completed_count,
                "mean_score": round(sum(scores) / len(scores), 6) if scores else None,
            }
        return {
            "trials_completed": self.trials_completed,
            "per_task": per_task,
            "duration_ms": self.now,
        }

    # ------------------------------------------------------------------
    # audio input

    def handle_block(self, block: SampleBlock) -> None:
        """Feed one capture block: record, frame, estimate, advance."""
        if not self.active:
            raise SessionError("not-active")
        if block.start_sample_index != self._next_sample:
            missing = block.start_sample_index - self._next_sample
            if missing < 0:
                raise SessionError(
                    f"overlapping block at sample {block.start_sample_index}"
                )
            # zero-fill so the sample clock stays contiguous
            self._emit(
                EventKind.AUDIO_GAP,
                {"at_sample": self._next_sample, "missing_samples": missing},
            )
            zeros = np.zeros(missing)
            self._wav.write(zeros)
            self._consume(zeros)
            self._next_sample += missing
        self._wav.write(block.samples)
        self._consume(block.samples)
        self._next_sample += len(block.samples)

    def _consume(self, samples: np.ndarray) -> None:
        for frame in self._stream.push(samples):
            t0 = _time.perf_counter()
            pf = yin_estimate(frame, self._pcfg)
            self.handle_frame(pf)
            self.frame_proc_ms.append((_time.perf_counter() - t0) * 1000.0)

    # ------------------------------------------------------------------
    # frame-driven state machine

    def handle_frame(self, pf: PitchFrame) -> None:
        if not self.active:
            raise SessionError("not-active")
        self.now = pf.time_ms
        self._advance_deadlines()
        self._log.append_pitch(pf)
        self.hub.publish(
            {
                "type": "pitch",
                "time_ms": pf.time_ms,
                "f0_hz": pf.f0_hz,
                "voiced": pf.voiced,
                "rms": pf.rms,
            }
        )
        self._consume_frame(pf)

    def _advance_deadlines(self) -> None:
        """Apply every deadline crossing due at the current time."""
        if self.phase is TrialPhase.IDLE:
            if (
                self.auto_run
                and self.trials_completed < self.cfg.n_trials
                and any(e.enabled for e in self.queue)
            ):
                self._begin_trial()
            return

        if self.phase is TrialPhase.COUNTDOWN:
            remaining = int(np.ceil((self._deadline - self.now) / 1000.0))
            if self.now >= self._deadline:
                self._go_cue()
            elif remaining != self._countdown_last and remaining > 0:
                self._countdown_last = remaining
                self._emit(EventKind.COUNTDOWN, {"remaining_s": remaining})
                self.hub.publish(
                    {"type": "countdown", "time_ms": self.now,
                     "remaining_s": remaining}
                )
            return

        if self.phase is TrialPhase.BASELINE_CAPTURE:
            if self.now - self._trial.go_time_ms >= self.cfg.baseline_ms:
                self._resolve_baseline()
            return

        if self.phase is TrialPhase.TRACKING:
            if self.now - self._trial.onset_ms >= self._trial.task.duration_ms:
                self._grade_trial()
            return

        if self.phase is TrialPhase.PLAYBACK:
            if self.now >= self._deadline:
                self._emit(EventKind.PLAYBACK_END, {"task_id": self._trial.task.id})
                self._enter_delay()
            return

        if self.phase is TrialPhase.INTER_TRIAL_DELAY:
            if self.now >= self._deadline:
                self._trial = None
                self._apply_pending(self._pending_phase)
                self._apply_pending(self._pending_trial)
                if (
                    self.auto_run
                    and self.trials_completed < self.cfg.n_trials
                    and any(e.enabled for e in self.queue)
                ):
                    self._begin_trial()
                else:
                    self._enter(TrialPhase.IDLE)
            return

    def _consume_frame(self, pf: PitchFrame) -> None:
        if self.phase is TrialPhase.BASELINE_CAPTURE:
            self._trial.baseline_frames.append(pf)
        elif self.phase is TrialPhase.TRACKING:
            rel = self.now - self._trial.onset_ms
            rebased = replace(pf, time_ms=rel)
            self._trial.frames.append(rebased)
            arrow = self._live_arrow(rebased)
            if arrow is not None:
                self._trial.live_arrows.append(arrow)
                self.hub.publish(
                    {
                        "type": "arrow",
                        "time_ms": arrow.time_ms,
                        "from_hz": arrow.from_hz,
                        "to_hz": arrow.to_hz,
                        "direction": arrow.direction.value,
                    }
                )

    def _live_arrow(self, rebased: PitchFrame) -> GuidanceArrow | None:
        mode = self.cfg.guidance_mode
        contour = self._trial.contour
        if mode is GuidanceMode.NONE:
            return None
        if mode is GuidanceMode.SPARSE:
            near = any(
                abs(rebased.time_ms - t) <= self.cfg.guidance_window_ms
                for t in contour.change_times_ms
            )
            if not near:
                return None
        return _arrow_for(rebased, contour)

    # ------------------------------------------------------------------
    # trial steps

    def begin_trial(self, task: TaskSpec | None = None) -> None:
        """Explicitly start a trial (tests and manual drivers)."""
        if self.phase is not TrialPhase.IDLE:
            raise SessionError(f"cannot start a trial from phase {self.phase.value}")
        self._begin_trial(task)

    def _begin_trial(self, task: TaskSpec | None = None) -> None:
        self._apply_pending(self._pending_phase)
        self._apply_pending(self._pending_trial)
        explicit = task is not None
        if task is None:
            try:
                task = next_task(self.queue, self.rng)
            except NoTaskError:
                self._enter(TrialPhase.IDLE)
                return
        entry = self._entry_for(task.id)
        if entry is None:
            entry = TaskQueueEntry(task=task)
            self.queue.append(entry)
        if explicit:
            # an explicitly requested task runs exactly as given
            resolved = task
        else:
            resolved = entry.task
            if entry.follows_default and resolved.pattern is not Pattern.SUSTAIN:
                resolved = replace(resolved, cents=self.cfg.cents_default)
        self._trial = _Trial(entry=entry, task=resolved)
        self._emit(
            EventKind.TASK_PROMPT,
            {
                "task_id": resolved.id,
                "pattern": resolved.pattern.value,
                "cents": resolved.effective_cents,
                "duration_ms": resolved.duration_ms,
                "attempt": self._trial.attempt,
            },
        )
        self._start_countdown()

    def _start_countdown(self) -> None:
        self._enter(TrialPhase.COUNTDOWN)
        self._deadline = self.now + self.cfg.countdown_s * 1000.0
        self._countdown_last = -1
        remaining = int(np.ceil(self.cfg.countdown_s))
        if remaining > 0:
            self._countdown_last = remaining
            self._emit(EventKind.COUNTDOWN, {"remaining_s": remaining})
            self.hub.publish(
                {"type": "countdown", "time_ms": self.now, "remaining_s": remaining}
            )

    def _go_cue(self) -> None:
        self._enter(TrialPhase.GO_CUE)
        self._emit(EventKind.GO_CUE, {"task_id": self._trial.task.id})
        self._send_ttl(EventKind.GO_CUE)
        self._enter(TrialPhase.BASELINE_CAPTURE)
        self._trial.go_time_ms = self.now
        self._trial.baseline_frames = []
        self._emit(EventKind.BASELINE_START, {"window_ms": self.cfg.baseline_ms})

    def _resolve_baseline(self) -> None:
        trial = self._trial
        frames = trial.baseline_frames
        voiced = sum(1 for f in frames if f.voiced)
        fraction = voiced / len(frames) if frames else 0.0
        try:
            base_hz = capture_baseline(frames, self.cfg.baseline_min_voiced)
        except BaselineError:
            self._emit(
                EventKind.BASELINE_RESULT,
                {
                    "ok": False,
                    "voiced_fraction": round(fraction, 6),
                    "attempt": trial.attempt,
                },
            )
            if trial.attempt < MAX_BASELINE_ATTEMPTS:
                trial.attempt += 1
                trial.baseline_frames = []
                self._emit(
                    EventKind.TASK_PROMPT,
                    {
                        "task_id": trial.task.id,
                        "pattern": trial.task.pattern.value,
                        "cents": trial.task.effective_cents,
                        "duration_ms": trial.task.duration_ms,
                        "attempt": trial.attempt,
                    },
                )
                self._start_countdown()
            else:
                self._emit(
                    EventKind.TRIAL_ABORTED,
                    {"task_id": trial.task.id, "reason": "baseline_failure"},
                )
                self._enter_delay()
            return

        trial.base_hz = base_hz
        self._emit(
            EventKind.BASELINE_RESULT,
            {
                "ok": True,
                "base_hz": round(base_hz, 6),
                "voiced_fraction": round(fraction, 6),
            },
        )
        trial.contour = generate_contour(
            trial.task, base_hz, self.cfg.band, self.cfg.hop_ms
        )
        trial.onset_ms = self.now
        self._enter(TrialPhase.TRACKING)
        self._emit(
            EventKind.TARGET_ONSET,
            {
                "task_id": trial.task.id,
                "base_hz": round(base_hz, 6),
                "cents": trial.task.effective_cents,
                "duration_ms": trial.task.duration_ms,
                "band_cents": self.cfg.band.half_width_cents,
            },
        )
        self._send_ttl(EventKind.TARGET_ONSET)
        self.hub.publish(self._contour_message(trial))

    def _contour_message(self, trial: _Trial) -> dict[str, Any]:
        c = trial.contour
        return {
            "type": "contour",
            "time_ms": self.now,
            "task_id": trial.task.id,
            "onset_ms": trial.onset_ms,
            "base_hz": c.base_hz,
            "hop_ms": c.hop_ms,
            "duration_ms": c.duration_ms,
            "times_ms": list(c.times_ms),
            "target_hz": list(c.target_hz),
            "upper_hz": list(c.upper_hz),
            "lower_hz": list(c.lower_hz),
            "change_times_ms": list(c.change_times_ms),
        }

    def _grade_trial(self) -> None:
        trial = self._trial
        score = score_trial(trial.frames, trial.contour)
        category = feedback_category(score, self.cfg.grading)
        mode = self.cfg.guidance_mode
        if mode is GuidanceMode.DENSE:
            arrows = tuple(dense_guidance(trial.frames, trial.contour))
        elif mode is GuidanceMode.SPARSE:
            arrows = tuple(
                sparse_guidance(
                    trial.frames, trial.contour, self.cfg.guidance_window_ms
                )
            )
        else:
            arrows = ()
        result = TrialResult(
            task_id=trial.task.id,
            score=score,
            category=category,
            frames=tuple(trial.frames),
            arrows=arrows,
            contour=trial.contour,
            onset_ms=trial.onset_ms,
            completed_ms=self.now,
        )
        self.results.append(result)
        self._scores.setdefault(trial.task.id, []).append(score)
        trial.entry.completed_count += 1
        self.trials_completed += 1

        self._enter(TrialPhase.GRADING)
        self._emit(
            EventKind.TRIAL_COMPLETE,
            {
                "task_id": trial.task.id,
                "score": round(score, 6),
                "category": category.value,
            },
        )
        self._send_ttl(EventKind.TRIAL_COMPLETE)
        self._log.append_task(
            TaskRecord.from_result(
                result,
                pattern=trial.task.pattern.value,
                cents=trial.task.effective_cents,
                inverted=trial.task.inverted,
            )
        )
        self.hub.publish(
            {
                "type": "trial_result",
                "time_ms": self.now,
                "task_id": trial.task.id,
                "score": round(score, 6),
                "category": category.value,
            }
        )
        self._publish_counters()
        self._log.flush()

        if self.cfg.playback_enabled:
            self._start_playback()
        else:
            self._enter_delay()

    def _start_playback(self) -> None:
        trial = self._trial
        span = (trial.onset_ms, trial.onset_ms + trial.task.duration_ms)
        self._enter(TrialPhase.PLAYBACK)
        self._deadline = self.now + trial.task.duration_ms
        self._emit(
            EventKind.PLAYBACK_START,
            {"task_id": trial.task.id, "span_ms": [span[0], span[1]]},
        )
        self._send_ttl(EventKind.PLAYBACK_START)
        self.hub.publish(
            {
                "type": "playback",
                "time_ms": self.now,
                "task_id": trial.task.id,
                "span_ms": [span[0], span[1]],
                "contour": self._contour_message(trial),
                "frames": [
                    [f.time_ms, f.f0_hz] for f in trial.frames if f.voiced
                ],
            }
        )
        if self.playback_player is not None:
            self.playback_player(span[0], span[1])

    def _enter_delay(self) -> None:
        self._enter(TrialPhase.INTER_TRIAL_DELAY)
        delay = self.cfg.delay_base_ms
        if self.cfg.delay_jitter_ms > 0:
            delay += self.rng.uniform(
                -self.cfg.delay_jitter_ms, self.cfg.delay_jitter_ms
            )
        self._deadline = self.now + max(0.0, delay)

    def _enter(self, phase: TrialPhase) -> None:
        if phase not in LEGAL_TRANSITIONS[self.phase]:
            raise SessionError(
                f"illegal phase transition {self.phase.value} -> {phase.value}"
            )
        self.phase = phase
        if self._log is not None:
            self._log.flush()
        msg: dict[str, Any] = {"type": "phase", "phase": phase.value,
                               "time_ms": self.now}
        if self._trial is not None and phase is not TrialPhase.IDLE:
            msg["task_id"] = self._trial.task.id
        self.hub.publish(msg)

    # ------------------------------------------------------------------
    # control surface

    def apply_update(self, patch: dict[str, Any]) -> dict[str, Any]:
        """Validate and stage a config patch; returns what applied when.

        The whole patch is rejected if any field is unknown, immutable,
        or carries an invalid value.
        """
        if not self.active:
            raise SessionError("not-active")
        if not patch:
            raise SessionError("empty patch")

        errors = []
        for key in patch:
            if key in SessionConfig.IMMUTABLE_FIELDS:
                errors.append(f"{key} is immutable after session start")
            elif key not in SessionConfig.__dataclass_fields__:
                errors.append(f"unknown config field {key}")
        if not errors:
            try:
                candidate = self._patched_config(patch)
                candidate.validate()
            except (ValueError, TypeError) as exc:
                errors.append(str(exc))
        if errors:
            self._emit(
                EventKind.PARAM_UPDATE,
                {"accepted": False, "patch": patch, "errors": errors},
            )
            raise SessionError("; ".join(errors))

        immediate = {
            k: v for k, v in patch.items() if k in SessionConfig.IMMEDIATE_FIELDS
        }
        trial_pending = {
            k: v for k, v in patch.items() if k in SessionConfig.TRIAL_BOUNDARY_FIELDS
        }
        phase_pending = {
            k: v
            for k, v in patch.items()
            if k not in SessionConfig.IMMEDIATE_FIELDS
            and k not in SessionConfig.TRIAL_BOUNDARY_FIELDS
        }
        if immediate:
            self._apply_pending(immediate)
        mid_trial = self._trial is not None
        if phase_pending:
            if mid_trial:
                self._pending_phase.update(phase_pending)
            else:
                self._apply_pending(phase_pending)
        if trial_pending:
            if mid_trial:
                self._pending_trial.update(trial_pending)
            else:
                self._apply_pending(trial_pending)

        applied = {
            "accepted": True,
            "patch": patch,
            "applied_now": sorted(immediate),
            "applied_next_phase": sorted(phase_pending) if mid_trial else [],
            "applied_next_trial": sorted(trial_pending) if mid_trial else [],
        }
        self._emit(EventKind.PARAM_UPDATE, applied)
        self._publish_snapshot()
        return applied

    def _patched_config(self, patch: dict[str, Any]) -> SessionConfig:
        doc = self.cfg.to_dict()
        for key, value in patch.items():
            if key in ("grading", "band"):
                merged = dict(doc[key])
                merged.update(value)
                doc[key] = merged
            else:
                doc[key] = value
        return SessionConfig.from_dict(doc)

    def _apply_pending(self, pending: dict[str, Any]) -> None:
        if not pending:
            return
        self.cfg = self._patched_config(pending)
        pending.clear()

    def queue_edit(self, edit: dict[str, Any]) -> dict[str, Any]:
        """enable / disable / invert / add / remove a task; applies immediately."""
        if not self.active:
            raise SessionError("not-active")
        op = edit.get("op")
        task_id = edit.get("task_id")
        if op == "add":
            entry = entry_from_dict(edit["task"], self.cfg.cents_default)
            entry.task.validate(self.cfg.hop_ms)
            if self._entry_for(entry.task.id) is not None:
                raise SessionError(f"task id {entry.task.id} already queued")
            self.queue.append(entry)
        else:
            entry = self._entry_for(task_id)
            if entry is None:
                raise SessionError(f"no task with id {task_id}")
            if op == "enable":
                entry.enabled = True
            elif op == "disable":
                entry.enabled = False
            elif op == "invert":
                entry.task = invert_task(entry.task)
            elif op == "remove":
                self.queue.remove(entry)
            else:
                raise SessionError(f"unknown queue op {op}")
        self._emit(EventKind.PARAM_UPDATE, {"queue_edit": edit, "accepted": True})
        self._publish_counters()
        self._publish_snapshot()
        return {"queue": self.queue_snapshot()}

    def connect_ttl(self, port: str, baud: int = 115200) -> bool:
        """(Re)connect the TTL port mid-session; the attempt is event-logged."""
        if not self.active:
            raise SessionError("not-active")
        ok = self.ttl.connect(port, baud)
        self._emit(
            EventKind.PARAM_UPDATE,
            {"ttl_connect": {"port": port, "baud": baud, "connected": ok}},
        )
        self._publish_snapshot()
        return ok

    def trigger_playback_replay(self) -> None:
        """Re-broadcast the last graded trial for passive review."""
        if not self.results:
            raise SessionError("no completed trial to replay")
        result = self.results[-1]
        c = result.contour
        self.hub.publish(
            {
                "type": "playback",
                "time_ms": self.now,
                "task_id": result.task_id,
                "span_ms": [result.onset_ms, result.onset_ms + c.duration_ms],
                "contour": {
                    "type": "contour",
                    "time_ms": self.now,
                    "task_id": result.task_id,
                    "onset_ms": result.onset_ms,
                    "base_hz": c.base_hz,
                    "hop_ms": c.hop_ms,
                    "duration_ms": c.duration_ms,
                    "times_ms": list(c.times_ms),
                    "target_hz": list(c.target_hz),
                    "upper_hz": list(c.upper_hz),
                    "lower_hz": list(c.lower_hz),
                    "change_times_ms": list(c.change_times_ms),
                },
                "frames": [[f.time_ms, f.f0_hz] for f in result.frames if f.voiced],
            }
        )
        if self.playback_player is not None:
            self.playback_player(result.onset_ms, result.onset_ms + c.duration_ms)

    # ------------------------------------------------------------------
    # introspection

    def _entry_for(self, task_id: str | None) -> TaskQueueEntry | None:
        for entry in self.queue:
            if entry.task.id == task_id:
                return entry
        return None

    def active_contour(self) -> tuple[TargetContour, float] | None:
        """(contour, onset_ms) while tracking, else None."""
        if (
            self.phase is TrialPhase.TRACKING
            and self._trial is not None
            and self._trial.contour is not None
        ):
            return self._trial.contour, self._trial.onset_ms
        return None

    def queue_snapshot(self) -> list[dict[str, Any]]:
        return [
            {
                "task": task_to_dict(e.task),
                "enabled": e.enabled,
                "completed_count": e.completed_count,
            }
            for e in self.queue
        ]

    def snapshot(self) -> dict[str, Any]:
        return {
            "active": self.active,
            "phase": self.phase.value,
            "time_ms": self.now,
            "trials_completed": self.trials_completed,
            "config": self.cfg.to_dict(),
            "queue": self.queue_snapshot(),
            "pending_next_phase": dict(self._pending_phase),
            "pending_next_trial": dict(self._pending_trial),
            "ttl": {"connected": self.ttl.connected, "port": self.ttl.port_name},
        }

    def _publish_snapshot(self) -> None:
        self.hub.publish({"type": "snapshot", "state": self.snapshot()})

    def _publish_counters(self) -> None:
        self.hub.publish(
            {
                "type": "counters",
                "time_ms": self.now,
                "tasks": self.queue_snapshot(),
                "trials_completed": self.trials_completed,
                "n_trials": self.cfg.n_trials,
            }
        )

    # ------------------------------------------------------------------
    # internals

    def _emit(self, kind: EventKind, payload: dict[str, Any]) -> None:
        rec = EventRecord(self.now, kind, payload)
        if self._log is not None:
            self._log.append_event(rec)
        self.hub.publish(
            {"type": "event", "time_ms": self.now, "kind": kind.value,
             "payload": payload}
        )

    def _send_ttl(self, kind: EventKind) -> None:
        marker = self.ttl.send(kind, self.now)
        self._emit(
            EventKind.TTL_SENT,
            {
                "marker_kind": kind.value,
                "code": TTL_CODES[kind],
                "sent": marker is not None,
            },
        )

    # ------------------------------------------------------------------
    # convenience for tests and scripted drivers

    def run_trial(
        self, task: TaskSpec, frames: Iterable[PitchFrame]
    ) -> TrialResult:
        """Drive one explicit trial from a frame iterable; returns its result."""
        if self.phase is not TrialPhase.IDLE:
            raise SessionError("session is mid-trial")
        before = len(self.results)
        self.begin_trial(task)
        for pf in frames:
            self.handle_frame(pf)
            if len(self.results) > before:
                return self.results[-1]
        raise SessionError("frame stream ended before the trial completed")
